#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hllm::utf8 {

// Returns the byte offset of the first invalid sequence, or nullopt if `s` is valid UTF-8.
std::optional<std::size_t> find_invalid(std::string_view s);

inline bool is_valid(std::string_view s) { return !find_invalid(s).has_value(); }

// Decodes `s`; throws DataError carrying the offset of the first bad byte.
std::u32string decode(std::string_view s);

void append(std::string& out, char32_t cp);
std::string encode(std::u32string_view cps);

bool is_space(char32_t cp);

// Maximal runs of non-whitespace.
std::vector<std::string_view> split_words(std::string_view s);
std::size_t count_words(std::string_view s);

}  // namespace hllm::utf8
