#pragma once

// Small UTF-8 and string helpers shared by the loaders, parsers and tokenizer.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kpe::text {

/// Byte offset of the first invalid UTF-8 sequence, or nullopt when valid.
std::optional<std::size_t> find_invalid_utf8(std::string_view s);

/// Decodes valid UTF-8 into code points. Behavior on invalid input is to
/// emit U+FFFD per bad byte; callers validate first when that matters.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
void append_utf8(std::string& out, char32_t cp);

/// Trims ASCII and Unicode whitespace from both ends.
std::string_view trim(std::string_view s);
std::string ascii_lower(std::string_view s);

bool is_space(char32_t cp);
/// Unicode general category P* (connector, dash, open, close, initial,
/// final, other punctuation).
bool is_punctuation(char32_t cp);
/// Han ideographs and kana, which are tokenized one character at a time.
bool is_cjk(char32_t cp);

std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace kpe::text
