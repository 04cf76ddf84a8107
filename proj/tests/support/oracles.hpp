#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// Nothing here calls into the library code under test.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oracle {

struct NaiveMerge {
  std::uint32_t left, right, id;
  bool operator==(const NaiveMerge&) const = default;
};

inline bool ascii_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Whitespace runs and word runs; a word steals the final byte of the run
// before it when that byte is a plain space.
inline std::vector<std::string> naive_chunks(const std::string& text) {
  std::vector<std::string> runs;
  for (char c : text) {
    if (runs.empty() || ascii_ws(runs.back().back()) != ascii_ws(c))
      runs.emplace_back(1, c);
    else
      runs.back() += c;
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const bool word = !ascii_ws(runs[i][0]);
    if (word && !out.empty() && ascii_ws(out.back()[0]) && out.back().back() == ' ') {
      out.back().pop_back();
      if (out.back().empty()) out.pop_back();
      out.push_back(" " + runs[i]);
    } else {
      out.push_back(runs[i]);
    }
  }
  return out;
}

// Textbook quadratic BPE: recount every adjacent pair of every chunk
// occurrence on each iteration, pick the most frequent (ties: smallest
// pair), replace left to right.
inline std::vector<NaiveMerge> naive_bpe(const std::vector<std::string>& corpus, std::size_t target_vocab) {
  std::vector<std::vector<std::uint32_t>> seqs;
  for (const auto& doc : corpus)
    for (const auto& chunk : naive_chunks(doc)) {
      std::vector<std::uint32_t> s;
      for (unsigned char c : chunk) s.push_back(c);
      seqs.push_back(s);
    }
  std::vector<NaiveMerge> merges;
  std::uint32_t next = 256;
  while (next < target_vocab) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> counts;
    for (const auto& s : seqs)
      for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[{s[i], s[i + 1]}];
    std::pair<std::uint32_t, std::uint32_t> best{};
    std::uint64_t best_n = 0;
    for (const auto& [p, n] : counts)
      if (n > best_n) {
        best = p;
        best_n = n;
      }
    if (best_n < 2) break;
    merges.push_back({best.first, best.second, next});
    for (auto& s : seqs) {
      std::vector<std::uint32_t> t;
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == best.first && s[i + 1] == best.second) {
          t.push_back(next);
          i += 2;
        } else {
          t.push_back(s[i++]);
        }
      }
      s = std::move(t);
    }
    ++next;
  }
  return merges;
}

struct NaiveMacro {
  double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;
};

// Expands the confusion matrix into individual (truth, predicted) items and
// counts TP/FP/FN per class by scanning them.
inline NaiveMacro naive_macro(const std::vector<std::vector<std::uint64_t>>& confusion) {
  const std::size_t k = confusion.size();
  std::vector<std::pair<std::size_t, std::size_t>> items;
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t p = 0; p < k; ++p)
      for (std::uint64_t n = 0; n < confusion[t][p]; ++n) items.emplace_back(t, p);
  NaiveMacro m;
  std::size_t correct = 0;
  for (const auto& [t, p] : items) correct += t == p;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(items.size());
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (const auto& [t, p] : items) {
      if (t == c && p == c) ++tp;
      if (t != c && p == c) ++fp;
      if (t == c && p != c) ++fn;
    }
    const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double f = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    m.precision += prec;
    m.recall += rec;
    m.f1 += f;
  }
  m.precision /= double(k);
  m.recall /= double(k);
  m.f1 /= double(k);
  return m;
}

// Synthetic Hindi-like prose: words are built from consonant + vowel-sign
// syllables, drawn with Zipfian frequencies, grouped into danda-terminated
// sentences.
class DevanagariGenerator {
 public:
  DevanagariGenerator(std::uint64_t vocab_seed, std::size_t vocab_size) : rng_(vocab_seed) {
    static const char* consonants[] = {"क", "ख", "ग", "घ", "च", "छ", "ज", "झ", "ट", "ठ", "ड", "ढ", "ण",
                                       "त", "थ", "द", "ध", "न", "प", "फ", "ब", "भ", "म", "य", "र", "ल",
                                       "व", "श", "ष", "स", "ह"};
    static const char* signs[] = {"", "ा", "ि", "ी", "ु", "ू", "े", "ै", "ो", "ौ", "ं", "्"};
    std::uniform_int_distribution<std::size_t> nsyl(1, 4), pc(0, std::size(consonants) - 1),
        ps(0, std::size(signs) - 1);
    while (words_.size() < vocab_size) {
      std::string w;
      const std::size_t n = nsyl(rng_);
      for (std::size_t i = 0; i < n; ++i) {
        w += consonants[pc(rng_)];
        w += signs[ps(rng_)];
      }
      words_.push_back(w);
    }
    double acc = 0.0;
    for (std::size_t r = 0; r < words_.size(); ++r) {
      acc += 1.0 / static_cast<double>(r + 1);
      cdf_.push_back(acc);
    }
    for (double& c : cdf_) c /= acc;
  }

  std::string sentence(std::mt19937_64& rng) const {
    std::uniform_int_distribution<int> len(4, 14);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::string s;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      if (i) s += ' ';
      const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u(rng));
      s += words_[std::min<std::size_t>(it - cdf_.begin(), words_.size() - 1)];
    }
    return s + "।";
  }

  // Documents of several lines until at least `bytes` bytes are produced.
  std::vector<std::string> documents(std::size_t bytes, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::vector<std::string> docs;
    std::size_t total = 0;
    while (total < bytes) {
      std::string doc;
      for (int l = 0; l < 5; ++l) {
        if (l) doc += '\n';
        doc += sentence(rng);
      }
      total += doc.size();
      docs.push_back(std::move(doc));
    }
    return docs;
  }

 private:
  mutable std::mt19937_64 rng_;
  std::vector<std::string> words_;
  std::vector<double> cdf_;
};

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("hllm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
