#include <string_view>

#include "kpe/prompting.hpp"

namespace kpe::prompting {

namespace {

// Generated from assets/templates/*.tmpl at configure time.
constexpr std::string_view kAssets[] = {
#include "builtin_templates.inc"
};

}  // namespace

const TemplateRegistry& builtin_templates() {
  static const TemplateRegistry registry = [] {
    TemplateRegistry r;
    for (auto asset : kAssets) r.add(parse_template_asset(asset));
    return r;
  }();
  return registry;
}

}  // namespace kpe::prompting
