#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "hllm/corpus.hpp"
#include "hllm/error.hpp"
#include "hllm/parallel.hpp"
#include "hllm/utf8.hpp"

namespace hllm::corpus {
namespace {

bool is_blank_line(std::string_view line) {
  return line.find_first_not_of(" \t\r\f\v") == std::string_view::npos;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw DataError("error while reading " + path.string());
  return std::move(ss).str();
}

std::vector<Document> merge_parallel_pairs(
    std::span<const std::pair<std::string, std::string>> pairs, std::uint64_t seed) {
  // Top bit of a 64-bit Mersenne Twister draw: portable across standard libraries.
  std::mt19937_64 gen(seed);
  std::vector<Document> docs;
  docs.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [hindi, english] = pairs[i];
    const bool hindi_first = (gen() >> 63) != 0;
    Document doc;
    doc.source_id = "pair:" + std::to_string(i);
    doc.lines = hindi_first ? std::vector<std::string>{hindi, english}
                            : std::vector<std::string>{english, hindi};
    docs.push_back(std::move(doc));
  }
  return docs;
}

CorpusStats stats_of(std::string_view contents, std::string_view name) {
  if (auto bad = utf8::find_invalid(contents))
    throw DataError(std::string(name) + ": invalid UTF-8 at byte offset " + std::to_string(*bad));
  CorpusStats s;
  s.bytes = contents.size();
  s.words = utf8::count_words(contents);
  bool in_document = false;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    const std::string_view line = contents.substr(pos, nl - pos);
    if (is_blank_line(line)) {
      in_document = false;
    } else {
      ++s.lines;
      if (!in_document) ++s.documents;
      in_document = true;
    }
    pos = nl + 1;
  }
  return s;
}

CorpusStats corpus_stats(std::span<const std::filesystem::path> paths, unsigned threads) {
  std::vector<CorpusStats> per_file(paths.size());
  parallel_for(paths.size(), threads, [&](std::size_t i) {
    per_file[i] = stats_of(read_file(paths[i]), paths[i].string());
  });
  CorpusStats total;
  for (const auto& s : per_file) total += s;
  return total;
}

std::vector<Document> read_documents(std::istream& in, std::string_view source_id) {
  std::vector<Document> docs;
  Document current;
  std::string line;
  std::size_t line_no = 0;
  std::size_t index = 0;
  const auto flush = [&] {
    if (current.lines.empty()) return;
    current.source_id = std::string(source_id) + ":" + std::to_string(index++);
    docs.push_back(std::move(current));
    current = Document{};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (auto bad = utf8::find_invalid(line))
      throw DataError(std::string(source_id) + ":" + std::to_string(line_no) +
                      ": invalid UTF-8 at byte offset " + std::to_string(*bad));
    if (is_blank_line(line)) {
      flush();
    } else {
      current.lines.push_back(std::move(line));
    }
  }
  flush();
  return docs;
}

std::vector<Document> read_documents(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return read_documents(in, path.filename().string());
}

void write_documents(std::ostream& out, std::span<const Document> docs) {
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i > 0) out << '\n';
    for (const auto& line : docs[i].lines) out << line << '\n';
  }
}

std::vector<std::pair<std::string, std::string>> read_parallel_pairs(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected exactly two tab-separated fields");
    if (auto bad = utf8::find_invalid(line))
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": invalid UTF-8 at byte offset " + std::to_string(*bad));
    pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return pairs;
}

}  // namespace hllm::corpus
