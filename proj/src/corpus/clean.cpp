#include <unicode/uchar.h>

#include <algorithm>
#include <string_view>
#include <unordered_set>

#include "hllm/corpus.hpp"
#include "hllm/parallel.hpp"
#include "hllm/utf8.hpp"

namespace hllm::corpus {
namespace {

constexpr char32_t kDanda = 0x0964;

bool is_spacing_mark(char32_t c) {
  return c == kDanda || c == '.' || c == ',' || c == '!' || c == '?';
}

bool is_digit(char32_t c) { return (c >= '0' && c <= '9') || (c >= 0x0966 && c <= 0x096F); }

char32_t closer_for(char32_t open) {
  switch (open) {
    case '(': return ')';
    case '[': return ']';
    case '{': return '}';
    default: return 0;
  }
}

bool is_closer(char32_t c) { return c == ')' || c == ']' || c == '}'; }

std::u32string remove_brackets(std::u32string_view in) {
  std::u32string out;
  out.reserve(in.size());
  struct Open {
    std::size_t pos;
    char32_t closer;
  };
  std::vector<Open> stack;
  for (char32_t c : in) {
    if (char32_t closer = closer_for(c)) {
      stack.push_back({out.size(), closer});
      out.push_back(c);
    } else if (is_closer(c) && !stack.empty() && stack.back().closer == c) {
      out.resize(stack.back().pos);
      stack.pop_back();
    } else {
      out.push_back(c);
    }
  }
  return out;
}

bool starts_with(std::u32string_view s, std::size_t i, std::u32string_view prefix) {
  return s.substr(i, prefix.size()) == prefix;
}

bool is_blank(char32_t c) { return c == ' ' || c == '\t'; }

std::u32string remove_urls(std::u32string_view in) {
  std::u32string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size();) {
    const bool word_start = i == 0 || utf8::is_space(in[i - 1]);
    if (starts_with(in, i, U"http://") || starts_with(in, i, U"https://") ||
        (word_start && starts_with(in, i, U"www."))) {
      while (i < in.size() && !utf8::is_space(in[i])) ++i;
      continue;
    }
    out.push_back(in[i++]);
  }
  return out;
}

std::u32string collapse_blanks(std::u32string_view in) {
  std::u32string out;
  out.reserve(in.size());
  for (char32_t c : in) {
    if (is_blank(c)) {
      if (out.empty() || out.back() != ' ') out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

// No space before a mark; one space after it unless followed by space,
// another mark, a digit (decimals) or the end of the text.
std::u32string space_punctuation(std::u32string_view in) {
  std::u32string out;
  out.reserve(in.size() + 8);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char32_t c = in[i];
    if (!is_spacing_mark(c)) {
      out.push_back(c);
      continue;
    }
    while (!out.empty() && is_blank(out.back())) out.pop_back();
    out.push_back(c);
    if (i + 1 < in.size()) {
      const char32_t next = in[i + 1];
      if (!is_blank(next) && !utf8::is_space(next) && !is_spacing_mark(next) && !is_digit(next))
        out.push_back(' ');
    }
  }
  return out;
}

std::u32string trim(std::u32string s) {
  std::size_t b = 0, e = s.size();
  while (b < e && utf8::is_space(s[b])) ++b;
  while (e > b && utf8::is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::string clean_text(std::string_view raw) {
  std::u32string s = utf8::decode(raw);
  // Spacing can expose a new "www." at a word start, so repeat until stable.
  for (int pass = 0; pass < 16; ++pass) {
    std::u32string next = remove_brackets(s);
    next = remove_urls(next);
    next = collapse_blanks(next);
    next = space_punctuation(next);
    next = trim(std::move(next));
    if (next == s) break;
    s = std::move(next);
  }
  return utf8::encode(s);
}

double unique_word_ratio(std::string_view line) {
  const auto words = utf8::split_words(line);
  if (words.empty()) return 1.0;
  const std::unordered_set<std::string_view> distinct(words.begin(), words.end());
  return static_cast<double>(distinct.size()) / static_cast<double>(words.size());
}

bool is_content_free(std::string_view line) {
  for (char32_t c : utf8::decode(line)) {
    if (utf8::is_space(c)) continue;
    if (is_digit(c)) continue;
    const auto mask = U_GET_GC_MASK(static_cast<UChar32>(c));
    if ((mask & (U_GC_P_MASK | U_GC_S_MASK | U_GC_ND_MASK)) == 0) return false;
  }
  return true;
}

std::vector<std::string> drop_short_line_runs(std::vector<std::string> lines,
                                              std::size_t min_words, std::size_t min_run) {
  std::vector<std::string> kept;
  kept.reserve(lines.size());
  std::size_t i = 0;
  while (i < lines.size()) {
    if (utf8::count_words(lines[i]) >= min_words) {
      kept.push_back(std::move(lines[i++]));
      continue;
    }
    std::size_t j = i;
    while (j < lines.size() && utf8::count_words(lines[j]) < min_words) ++j;
    if (j - i < min_run)
      for (std::size_t k = i; k < j; ++k) kept.push_back(std::move(lines[k]));
    i = j;
  }
  return kept;
}

ScriptProfile script_profile(std::string_view text) {
  std::size_t deva = 0, latin = 0, digit = 0, other = 0;
  for (char32_t c : utf8::decode(text)) {
    if (utf8::is_space(c)) continue;
    if (is_digit(c)) {
      ++digit;
    } else if (c >= 0x0900 && c <= 0x097F) {
      ++deva;
    } else if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
               (c >= 0x00C0 && c <= 0x024F && c != 0x00D7 && c != 0x00F7)) {
      ++latin;
    } else {
      ++other;
    }
  }
  const std::size_t total = deva + latin + digit + other;
  if (total == 0) return {};
  const auto n = static_cast<double>(total);
  return {deva / n, latin / n, digit / n, other / n};
}

std::optional<Document> clean_document(const Document& doc, double min_devanagari) {
  std::vector<std::string> lines;
  lines.reserve(doc.lines.size());
  for (const auto& raw : doc.lines) {
    std::string line = clean_text(raw);
    if (line.empty() || is_content_free(line)) continue;
    if (unique_word_ratio(line) < kMinUniqueWordRatio) continue;
    lines.push_back(std::move(line));
  }
  lines = drop_short_line_runs(std::move(lines));
  if (lines.empty()) return std::nullopt;

  if (min_devanagari > 0.0) {
    std::string joined;
    for (const auto& l : lines) (joined += l) += '\n';
    if (script_profile(joined).devanagari_frac < min_devanagari) return std::nullopt;
  }
  return Document{std::move(lines), doc.source_id};
}

std::vector<Document> clean_documents(std::span<const Document> docs, double min_devanagari,
                                      unsigned threads) {
  std::vector<std::optional<Document>> slots(docs.size());
  parallel_for(docs.size(), threads,
               [&](std::size_t i) { slots[i] = clean_document(docs[i], min_devanagari); });
  std::vector<Document> out;
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  return out;
}

}  // namespace hllm::corpus
