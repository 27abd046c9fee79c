#include "kpe/errors.hpp"

namespace kpe {

namespace {

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

}  // namespace

MissingBindingError::MissingBindingError(std::vector<std::string> names)
    : Error("missing binding(s): " + join(names)), names_(std::move(names)) {}

UnknownBindingError::UnknownBindingError(std::vector<std::string> names)
    : Error("unknown binding(s): " + join(names)), names_(std::move(names)) {}

}  // namespace kpe
