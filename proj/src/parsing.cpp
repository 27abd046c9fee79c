#include "kpe/parsing.hpp"

#include <charconv>
#include <cmath>
#include <optional>

#include "kpe/errors.hpp"
#include "kpe/text.hpp"

namespace kpe::parsing {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string excerpt(std::string_view text) {
  constexpr std::size_t kMax = 80;
  if (text.size() <= kMax) return std::string(text);
  return std::string(text.substr(0, kMax)) + "...";
}

struct Number {
  double value;
  bool integral;
};

// First `[+-]?digits(.digits)?` in the text. A sign counts only when it
// directly precedes the digits.
std::optional<Number> first_number(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_digit(text[i])) continue;
    std::size_t start = i;
    if (start > 0 && (text[start - 1] == '-' || text[start - 1] == '+')) --start;
    std::size_t end = i;
    while (end < text.size() && is_digit(text[end])) ++end;
    bool integral = true;
    if (end + 1 < text.size() && text[end] == '.' && is_digit(text[end + 1])) {
      integral = false;
      ++end;
      while (end < text.size() && is_digit(text[end])) ++end;
    }
    std::string_view token = text.substr(start, end - start);
    if (token.front() == '+') token.remove_prefix(1);
    double value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc()) return std::nullopt;
    return Number{value, integral};
  }
  return std::nullopt;
}

}  // namespace

CategoryScore parse_categorical(std::string_view text, std::span<const std::string> classes) {
  const std::string haystack = text::ascii_lower(text);
  std::size_t best_index = classes.size();
  std::size_t best_pos = 0;
  std::size_t best_len = 0;
  bool tie = false;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const std::string needle = text::ascii_lower(classes[k]);
    if (needle.empty()) continue;
    const std::size_t pos = haystack.find(needle);
    if (pos == std::string::npos) continue;
    const std::size_t len = needle.size();
    if (best_index == classes.size() || len > best_len || (len == best_len && pos < best_pos)) {
      best_index = k;
      best_pos = pos;
      best_len = len;
      tie = false;
    } else if (len == best_len && pos == best_pos) {
      tie = true;
    }
  }
  if (best_index == classes.size()) {
    throw NoMatchError("no class name found in response: \"" + excerpt(text) + "\"");
  }
  if (tie) throw AmbiguityError("two classes match the same span in: \"" + excerpt(text) + "\"");
  return {best_index, classes[best_index]};
}

ScalarScore parse_scalar(std::string_view text, double lo, double hi) {
  auto number = first_number(text);
  if (!number) throw NoNumberError("no number in response: \"" + excerpt(text) + "\"");
  if (number->value < lo || number->value > hi) {
    throw RangeError("score " + std::to_string(number->value) + " outside [" +
                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return {number->value};
}

StarScore parse_stars(std::string_view text, int lo, int hi) {
  // U+2605 BLACK STAR; the first contiguous run is the rating.
  constexpr std::string_view kStar = "\xE2\x98\x85";
  if (auto pos = text.find(kStar); pos != std::string_view::npos) {
    int count = 0;
    while (text.substr(pos, kStar.size()) == kStar) {
      ++count;
      pos += kStar.size();
    }
    if (count < lo || count > hi) {
      throw RangeError(std::to_string(count) + " stars outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
    }
    return {count};
  }
  auto number = first_number(text);
  if (!number) throw NoMatchError("no star rating in response: \"" + excerpt(text) + "\"");
  if (!number->integral || number->value < lo || number->value > hi) {
    throw RangeError("star rating " + std::to_string(number->value) + " outside [" +
                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return {static_cast<int>(number->value)};
}

std::size_t category_to_ordinal(std::string_view class_string,
                                std::span<const std::string> classes) {
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (classes[k] == class_string) return k;
  }
  throw UnknownClassError("'" + std::string(class_string) + "' is not in the class list");
}

double parse_score(std::string_view text, const prompting::ResponseSchema& schema) {
  using prompting::SchemaKind;
  switch (schema.kind) {
    case SchemaKind::categorical:
      return static_cast<double>(parse_categorical(text, schema.classes).class_index);
    case SchemaKind::stars:
      return parse_stars(text, static_cast<int>(schema.lo), static_cast<int>(schema.hi)).stars;
    case SchemaKind::scalar:
      return parse_scalar(text, schema.lo, schema.hi).value;
    case SchemaKind::matrix:
      break;
  }
  throw ParseError("matrix responses are parsed by the alignment module");
}

}  // namespace kpe::parsing
