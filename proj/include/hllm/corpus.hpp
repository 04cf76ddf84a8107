#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Pre-training corpus refinement: line-level cleanup and filtering of
// Devanagari text, bilingual pair merging and corpus statistics.
namespace hllm::corpus {

struct Document {
  std::vector<std::string> lines;
  std::string source_id;

  bool operator==(const Document&) const = default;
};

// Fractions of non-whitespace codepoints per script class. All zero for
// input without any non-whitespace codepoint.
struct ScriptProfile {
  double devanagari_frac = 0.0;
  double latin_frac = 0.0;
  double digit_frac = 0.0;
  double other_frac = 0.0;
};

struct CorpusStats {
  std::uint64_t bytes = 0;
  std::uint64_t words = 0;
  std::uint64_t lines = 0;
  std::uint64_t documents = 0;

  CorpusStats& operator+=(const CorpusStats& o) {
    bytes += o.bytes;
    words += o.words;
    lines += o.lines;
    documents += o.documents;
    return *this;
  }
  bool operator==(const CorpusStats&) const = default;
};

inline constexpr double kMinUniqueWordRatio = 0.30;

// Removes matched bracket spans and URLs, collapses spaces and tabs,
// normalizes spacing around । . , ! ? and trims. Idempotent.
std::string clean_text(std::string_view raw);

// distinct words / total words; 1.0 for a line without words.
double unique_word_ratio(std::string_view line);

// True when every non-whitespace codepoint is a digit, punctuation or symbol.
bool is_content_free(std::string_view line);

// Removes every maximal run of at least `min_run` consecutive lines that
// each have fewer than `min_words` words.
std::vector<std::string> drop_short_line_runs(std::vector<std::string> lines,
                                              std::size_t min_words = 4,
                                              std::size_t min_run = 2);

ScriptProfile script_profile(std::string_view text);

// Full line pipeline plus the Devanagari script gate (0 disables the gate).
std::optional<Document> clean_document(const Document& doc, double min_devanagari = 0.5);

// Order-preserving parallel clean_document over a batch; rejected documents are dropped.
std::vector<Document> clean_documents(std::span<const Document> docs, double min_devanagari,
                                      unsigned threads = 1);

// One two-line document per pair; a seeded coin decides which side comes first.
std::vector<Document> merge_parallel_pairs(
    std::span<const std::pair<std::string, std::string>> pairs, std::uint64_t seed);

// Stats over a single in-memory buffer. `name` is used in error messages.
CorpusStats stats_of(std::string_view contents, std::string_view name = "<buffer>");

// Exact stats over files; parallel over files, identical for any thread count.
CorpusStats corpus_stats(std::span<const std::filesystem::path> paths, unsigned threads = 1);

// Blank-line-delimited documents. Invalid UTF-8 raises DataError.
std::vector<Document> read_documents(std::istream& in, std::string_view source_id);
std::vector<Document> read_documents(const std::filesystem::path& path);
void write_documents(std::ostream& out, std::span<const Document> docs);

// `hindi<TAB>english` per line.
std::vector<std::pair<std::string, std::string>> read_parallel_pairs(
    const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace hllm::corpus
