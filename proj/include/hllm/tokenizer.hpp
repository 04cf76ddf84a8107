#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hllm::bpe {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr std::size_t kByteAlphabet = 256;
inline constexpr std::size_t kNumSpecials = 8;
inline constexpr std::string_view kFormatHeader = "HLLM-TOK v1";

// Position of each special in the specials list.
enum class Special : std::uint32_t { EndOfText = 0, Bos, Cls, Sep, Pad, Mask, Unk, Reserved };

inline const std::array<std::string, kNumSpecials> kDefaultSpecials = {
    "<|endoftext|>", "<|bos|>", "<|cls|>", "<|sep|>",
    "<|pad|>",       "<|mask|>", "<|unk|>", "<|reserved|>"};

struct Merge {
  TokenId left;
  TokenId right;
  TokenId id;

  bool operator==(const Merge&) const = default;
};

// Splits text into pre-tokenization chunks. A word absorbs the single space
// directly before it; all other whitespace forms chunks of its own, so the
// concatenation of the chunks is always the input.
std::vector<std::string_view> pretokenize(std::string_view text);

// Byte-level BPE model: 256 byte tokens, ordered merges, 8 specials.
// Immutable once constructed and safe to share between threads.
class Tokenizer {
 public:
  // Validates the merge table; throws DataError on any invariant violation.
  Tokenizer(std::size_t target_vocab, std::vector<Merge> merges,
            std::array<std::string, kNumSpecials> specials = kDefaultSpecials);

  // The 0-merge model.
  static Tokenizer byte_level();

  std::size_t vocab_size() const { return kByteAlphabet + merges_.size() + kNumSpecials; }
  std::size_t target_vocab() const { return target_vocab_; }
  std::span<const Merge> merges() const { return merges_; }
  const std::array<std::string, kNumSpecials>& specials() const { return specials_; }

  TokenId special_id(Special s) const {
    return static_cast<TokenId>(kByteAlphabet + merges_.size() + static_cast<std::uint32_t>(s));
  }
  bool is_special(TokenId id) const {
    return id >= kByteAlphabet + merges_.size() && id < vocab_size();
  }

  TokenSeq encode(std::string_view text) const;

  // Throws DataError for unknown ids, specials (unless allowed, in which case
  // they render as their names) and for output that is not valid UTF-8.
  std::string decode(std::span<const TokenId> ids, bool allow_specials = false) const;

  // Raw bytes of a non-special token.
  std::string_view token_bytes(TokenId id) const;

  // Tokens per whitespace-delimited word; DataError when the text has no words.
  double fertility(std::string_view text) const;

  void write(std::ostream& out) const;
  static Tokenizer read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Tokenizer load(const std::filesystem::path& path);

  // SHA-256 of the serialized form.
  std::string digest() const;

  bool operator==(const Tokenizer& o) const {
    return target_vocab_ == o.target_vocab_ && merges_ == o.merges_ && specials_ == o.specials_;
  }

 private:
  void encode_chunk(std::string_view chunk, TokenSeq& out) const;

  std::size_t target_vocab_;
  std::vector<Merge> merges_;
  std::array<std::string, kNumSpecials> specials_;
  std::vector<std::string> bytes_;  // per non-special id
  std::unordered_map<std::uint64_t, std::uint32_t> rank_;  // pair key -> merge index
};

struct TrainOptions {
  std::size_t target_vocab = 50000;  // includes the 256 byte tokens
  std::array<std::string, kNumSpecials> specials = kDefaultSpecials;
  unsigned threads = 1;
};

// Repeatedly merges the most frequent adjacent pair (ties: smallest
// (left, right)) until target_vocab is reached or no pair occurs twice.
Tokenizer train_bpe(std::span<const std::string> corpus, const TrainOptions& options);

}  // namespace hllm::bpe
