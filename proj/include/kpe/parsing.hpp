#pragma once

// Turns raw completion text into typed scores. All functions are pure.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "kpe/prompting.hpp"

namespace kpe::parsing {

struct CategoryScore {
  std::size_t class_index = 0;
  std::string class_string;

  std::size_t ordinal() const noexcept { return class_index; }
};

struct ScalarScore {
  double value = 0;
};

struct StarScore {
  int stars = 0;
};

/// Case-insensitive search for the class names. The longest matching class
/// wins; equal lengths go to the earliest occurrence.
/// Throws NoMatchError, or AmbiguityError when two distinct classes match at
/// the same position with the same length.
CategoryScore parse_categorical(std::string_view text, std::span<const std::string> classes);

/// First decimal number in `text`. Out-of-range values are an error, not
/// clamped. Throws NoNumberError or RangeError.
ScalarScore parse_scalar(std::string_view text, double lo, double hi);

/// Accepts "N", "N/5", "N stars" or a run of N '★'. Throws NoMatchError or
/// RangeError.
StarScore parse_stars(std::string_view text, int lo = 1, int hi = 5);

/// Index of `class_string` in the worst-to-best list. Throws UnknownClassError.
std::size_t category_to_ordinal(std::string_view class_string,
                                std::span<const std::string> classes);

/// Parses according to the schema and returns the ordinal / star count /
/// scalar value as a double.
double parse_score(std::string_view text, const prompting::ResponseSchema& schema);

}  // namespace kpe::parsing
