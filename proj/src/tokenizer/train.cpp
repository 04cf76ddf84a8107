#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <unordered_map>

#include "hllm/error.hpp"
#include "hllm/parallel.hpp"
#include "hllm/tokenizer.hpp"

namespace hllm::bpe {
namespace {

using PairKey = std::uint64_t;

constexpr PairKey key_of(TokenId a, TokenId b) { return (static_cast<PairKey>(a) << 32) | b; }
constexpr TokenId left_of(PairKey k) { return static_cast<TokenId>(k >> 32); }
constexpr TokenId right_of(PairKey k) { return static_cast<TokenId>(k & 0xFFFFFFFFu); }

struct Word {
  std::vector<TokenId> syms;
  std::uint64_t freq;
};

// Chunk frequencies in lexicographic chunk order, so the result does not
// depend on how the corpus was split across workers.
std::vector<Word> count_chunks(std::span<const std::string> corpus, unsigned threads) {
  if (threads == 0) threads = default_threads();
  const std::size_t shards = std::max<std::size_t>(1, std::min<std::size_t>(threads, corpus.size()));
  std::vector<std::unordered_map<std::string_view, std::uint64_t>> partial(shards);
  parallel_for(shards, threads, [&](std::size_t s) {
    const std::size_t begin = corpus.size() * s / shards;
    const std::size_t end = corpus.size() * (s + 1) / shards;
    for (std::size_t i = begin; i < end; ++i)
      for (std::string_view chunk : pretokenize(corpus[i])) ++partial[s][chunk];
  });
  std::map<std::string_view, std::uint64_t> merged;
  for (const auto& p : partial)
    for (const auto& [chunk, n] : p) merged[chunk] += n;

  std::vector<Word> words;
  words.reserve(merged.size());
  for (const auto& [chunk, n] : merged) {
    Word w{{}, n};
    w.syms.reserve(chunk.size());
    for (char c : chunk) w.syms.push_back(static_cast<unsigned char>(c));
    words.push_back(std::move(w));
  }
  return words;
}

struct HeapEntry {
  std::int64_t count;
  PairKey pair;
};

// Max count first; among equal counts the smallest (left, right).
struct HeapOrder {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const {
    if (a.count != b.count) return a.count < b.count;
    return a.pair > b.pair;
  }
};

class PairTable {
 public:
  explicit PairTable(std::vector<Word>& words) : words_(words) {
    for (std::uint32_t w = 0; w < words_.size(); ++w) add_word(w, +1);
    for (const auto& [pair, count] : counts_) heap_.push({count, pair});
    touched_.clear();
  }

  // Best pair with count >= 2, or nullopt.
  std::optional<PairKey> best() {
    while (!heap_.empty()) {
      const HeapEntry top = heap_.top();
      auto it = counts_.find(top.pair);
      if (it == counts_.end() || it->second != top.count) {
        heap_.pop();
        continue;
      }
      if (top.count < 2) return std::nullopt;
      return top.pair;
    }
    return std::nullopt;
  }

  void apply(PairKey pair, TokenId new_id) {
    const TokenId a = left_of(pair), b = right_of(pair);
    std::vector<std::uint32_t> affected = std::move(index_[pair]);
    index_.erase(pair);
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
    for (std::uint32_t w : affected) {
      auto& syms = words_[w].syms;
      bool present = false;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i)
        if (syms[i] == a && syms[i + 1] == b) {
          present = true;
          break;
        }
      if (!present) continue;
      add_word(w, -1);
      std::size_t out = 0;
      for (std::size_t r = 0; r < syms.size();) {
        if (r + 1 < syms.size() && syms[r] == a && syms[r + 1] == b) {
          syms[out++] = new_id;
          r += 2;
        } else {
          syms[out++] = syms[r++];
        }
      }
      syms.resize(out);
      add_word(w, +1);
    }
    for (PairKey k : touched_) {
      auto it = counts_.find(k);
      if (it == counts_.end()) continue;
      if (it->second <= 0) {
        counts_.erase(it);
        continue;
      }
      heap_.push({it->second, k});
    }
    touched_.clear();
  }

 private:
  void add_word(std::uint32_t w, int sign) {
    const auto& syms = words_[w].syms;
    const auto delta = static_cast<std::int64_t>(words_[w].freq) * sign;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      const PairKey k = key_of(syms[i], syms[i + 1]);
      counts_[k] += delta;
      if (sign > 0) index_[k].push_back(w);
      touched_.push_back(k);
    }
  }

  std::vector<Word>& words_;
  std::unordered_map<PairKey, std::int64_t> counts_;
  std::unordered_map<PairKey, std::vector<std::uint32_t>> index_;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapOrder> heap_;
  std::vector<PairKey> touched_;
};

}  // namespace

Tokenizer train_bpe(std::span<const std::string> corpus, const TrainOptions& options) {
  if (options.target_vocab < kByteAlphabet + 1)
    throw UsageError("target_vocab must be at least 257, got " + std::to_string(options.target_vocab));
  if (corpus.empty()) throw UsageError("cannot train a tokenizer on an empty corpus");

  std::vector<Word> words = count_chunks(corpus, options.threads);
  PairTable table(words);
  std::vector<Merge> merges;
  const std::size_t max_merges = options.target_vocab - kByteAlphabet;
  merges.reserve(max_merges);
  while (merges.size() < max_merges) {
    const auto pair = table.best();
    if (!pair) break;
    const auto id = static_cast<TokenId>(kByteAlphabet + merges.size());
    merges.push_back({left_of(*pair), right_of(*pair), id});
    table.apply(*pair, id);
  }
  return Tokenizer(options.target_vocab, std::move(merges), options.specials);
}

}  // namespace hllm::bpe
