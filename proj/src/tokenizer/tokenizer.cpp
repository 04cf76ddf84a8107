#include "hllm/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "hllm/digest.hpp"
#include "hllm/error.hpp"
#include "hllm/utf8.hpp"

namespace hllm::bpe {
namespace {

constexpr std::uint64_t pair_key(TokenId a, TokenId b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

[[noreturn]] void fail_at(std::size_t line_no, const std::string& what) {
  throw DataError("tokenizer file line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t ws_end = i;
    while (ws_end < text.size() && is_ws(text[ws_end])) ++ws_end;
    if (ws_end == text.size()) {
      chunks.push_back(text.substr(i));
      break;
    }
    std::size_t word_start = ws_end;
    if (ws_end > i && text[ws_end - 1] == ' ') --word_start;
    if (word_start > i) chunks.push_back(text.substr(i, word_start - i));
    std::size_t word_end = ws_end;
    while (word_end < text.size() && !is_ws(text[word_end])) ++word_end;
    chunks.push_back(text.substr(word_start, word_end - word_start));
    i = word_end;
  }
  return chunks;
}

Tokenizer::Tokenizer(std::size_t target_vocab, std::vector<Merge> merges,
                     std::array<std::string, kNumSpecials> specials)
    : target_vocab_(target_vocab), merges_(std::move(merges)), specials_(std::move(specials)) {
  bytes_.reserve(kByteAlphabet + merges_.size());
  for (std::size_t b = 0; b < kByteAlphabet; ++b) bytes_.emplace_back(1, static_cast<char>(b));
  rank_.reserve(merges_.size());
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const Merge& m = merges_[r];
    if (m.id != kByteAlphabet + r)
      throw DataError("merge " + std::to_string(r) + " has id " + std::to_string(m.id) +
                      ", expected " + std::to_string(kByteAlphabet + r));
    if (m.left >= m.id || m.right >= m.id)
      throw DataError("merge " + std::to_string(r) + " references undefined id");
    if (!rank_.emplace(pair_key(m.left, m.right), static_cast<std::uint32_t>(r)).second)
      throw DataError("merge " + std::to_string(r) + " repeats an earlier pair");
    bytes_.push_back(bytes_[m.left] + bytes_[m.right]);
  }
  for (const auto& name : specials_) {
    if (name.empty() || std::any_of(name.begin(), name.end(), is_ws))
      throw DataError("special token names must be non-empty and contain no whitespace");
  }
}

Tokenizer Tokenizer::byte_level() { return Tokenizer(kByteAlphabet, {}); }

void Tokenizer::encode_chunk(std::string_view chunk, TokenSeq& out) const {
  TokenSeq seq;
  seq.reserve(chunk.size());
  for (char c : chunk) seq.push_back(static_cast<unsigned char>(c));
  // Apply the lowest-ranked mergeable pair everywhere until none is left;
  // equivalent to replaying the merge list in training order.
  while (seq.size() > 1) {
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      auto it = rank_.find(pair_key(seq[i], seq[i + 1]));
      if (it != rank_.end() && it->second < best) best = it->second;
    }
    if (best == std::numeric_limits<std::uint32_t>::max()) break;
    const Merge& m = merges_[best];
    std::size_t w = 0;
    for (std::size_t r = 0; r < seq.size();) {
      if (r + 1 < seq.size() && seq[r] == m.left && seq[r + 1] == m.right) {
        seq[w++] = m.id;
        r += 2;
      } else {
        seq[w++] = seq[r++];
      }
    }
    seq.resize(w);
  }
  out.insert(out.end(), seq.begin(), seq.end());
}

TokenSeq Tokenizer::encode(std::string_view text) const {
  TokenSeq out;
  out.reserve(text.size() / 2);
  for (std::string_view chunk : pretokenize(text)) encode_chunk(chunk, out);
  return out;
}

std::string_view Tokenizer::token_bytes(TokenId id) const {
  if (id >= bytes_.size()) throw DataError("token id " + std::to_string(id) + " has no byte form");
  return bytes_[id];
}

std::string Tokenizer::decode(std::span<const TokenId> ids, bool allow_specials) const {
  std::string out;
  for (TokenId id : ids) {
    if (id >= vocab_size())
      throw DataError("token id " + std::to_string(id) + " out of range (vocab " +
                      std::to_string(vocab_size()) + ")");
    if (is_special(id)) {
      if (!allow_specials) throw DataError("special token id " + std::to_string(id) + " in decode");
      out += specials_[id - kByteAlphabet - merges_.size()];
      continue;
    }
    out += bytes_[id];
  }
  if (auto bad = utf8::find_invalid(out))
    throw DataError("decoded bytes are not valid UTF-8 at offset " + std::to_string(*bad));
  return out;
}

double Tokenizer::fertility(std::string_view text) const {
  const std::size_t words = utf8::count_words(text);
  if (words == 0) throw DataError("fertility: text contains no words");
  return static_cast<double>(encode(text).size()) / static_cast<double>(words);
}

void Tokenizer::write(std::ostream& out) const {
  out << kFormatHeader << '\n' << "target_vocab " << target_vocab_ << '\n';
  for (const Merge& m : merges_) out << "M " << m.left << ' ' << m.right << ' ' << m.id << '\n';
  for (std::size_t i = 0; i < kNumSpecials; ++i)
    out << "S " << kByteAlphabet + merges_.size() + i << ' ' << specials_[i] << '\n';
}

Tokenizer Tokenizer::read(std::istream& in) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (!text.empty() && text.back() != '\n')
    throw DataError("tokenizer file truncated: missing final newline");

  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    const std::size_t nl = text.find('\n', pos);
    lines.push_back(std::string_view(text).substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty()) throw DataError("tokenizer file is empty");
  if (lines[0] != kFormatHeader)
    fail_at(1, "unsupported header '" + std::string(lines[0]) + "', expected '" +
                   std::string(kFormatHeader) + "'");

  std::size_t target_vocab = 0;
  {
    if (lines.size() < 2) fail_at(2, "missing target_vocab line");
    std::istringstream ls{std::string(lines[1])};
    std::string key, rest;
    if (!(ls >> key >> target_vocab) || key != "target_vocab" || (ls >> rest))
      fail_at(2, "malformed target_vocab line");
  }

  std::vector<Merge> merges;
  std::array<std::string, kNumSpecials> specials;
  std::size_t num_specials = 0;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::istringstream ls{std::string(lines[i])};
    std::string tag, rest;
    ls >> tag;
    if (tag == "M") {
      if (num_specials > 0) fail_at(line_no, "merge after special tokens");
      std::uint64_t l, r, id;
      if (!(ls >> l >> r >> id) || (ls >> rest)) fail_at(line_no, "malformed merge line");
      const std::uint64_t expected = kByteAlphabet + merges.size();
      if (id < expected) fail_at(line_no, "duplicate id " + std::to_string(id));
      if (id != expected) fail_at(line_no, "non-contiguous id " + std::to_string(id));
      if (l >= id || r >= id) fail_at(line_no, "merge references undefined id");
      merges.push_back({static_cast<TokenId>(l), static_cast<TokenId>(r), static_cast<TokenId>(id)});
    } else if (tag == "S") {
      std::uint64_t id;
      std::string name;
      if (!(ls >> id >> name) || (ls >> rest)) fail_at(line_no, "malformed special line");
      if (num_specials >= kNumSpecials) fail_at(line_no, "more than 8 special tokens");
      const std::uint64_t expected = kByteAlphabet + merges.size() + num_specials;
      if (id < expected) fail_at(line_no, "duplicate id " + std::to_string(id));
      if (id != expected) fail_at(line_no, "non-contiguous id " + std::to_string(id));
      specials[num_specials++] = name;
    } else {
      fail_at(line_no, "unrecognized line");
    }
  }
  if (num_specials != kNumSpecials)
    throw DataError("tokenizer file truncated: found " + std::to_string(num_specials) +
                    " of 8 special tokens");
  try {
    return Tokenizer(target_vocab, std::move(merges), std::move(specials));
  } catch (const DataError& e) {
    throw DataError(std::string("tokenizer file: ") + e.what());
  }
}

void Tokenizer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write(out);
  if (!out) throw DataError("error while writing " + path.string());
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return read(in);
}

std::string Tokenizer::digest() const {
  std::ostringstream ss;
  write(ss);
  return sha256_hex(ss.str());
}

}  // namespace hllm::bpe
