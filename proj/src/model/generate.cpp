#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "hllm/error.hpp"
#include "hllm/model.hpp"
#include "hllm/utf8.hpp"

namespace hllm::model {
namespace {

std::string decode_lossy(const bpe::Tokenizer& tok, std::span<const TokenId> ids) {
  std::string bytes;
  for (TokenId id : ids) bytes += tok.token_bytes(id);
  std::string out;
  std::string_view rest = bytes;
  while (!rest.empty()) {
    const auto bad = utf8::find_invalid(rest);
    if (!bad) {
      out += rest;
      break;
    }
    out += rest.substr(0, *bad);
    out += "\xEF\xBF\xBD";
    rest.remove_prefix(*bad + 1);
  }
  return out;
}

TokenId sample(std::span<const std::pair<double, TokenId>> weighted, double u) {
  double total = 0.0;
  for (const auto& [w, id] : weighted) total += w;
  const double target = u * total;
  double acc = 0.0;
  for (const auto& [w, id] : weighted) {
    acc += w;
    if (acc > target) return id;
  }
  for (auto it = weighted.rbegin(); it != weighted.rend(); ++it)
    if (it->first > 0.0) return it->second;
  return weighted.back().second;
}

}  // namespace

GenerateOptions GenerateOptions::parse_strategy(std::string_view spec) {
  GenerateOptions o;
  const auto bad = [&] {
    return UsageError("bad strategy '" + std::string(spec) + "' (greedy|temp:<tau>|topk:<k>)");
  };
  if (spec == "greedy") return o;
  if (spec.starts_with("temp:")) {
    const std::string v(spec.substr(5));
    std::size_t pos = 0;
    try {
      o.temperature = std::stod(v, &pos);
    } catch (const std::exception&) {
      throw bad();
    }
    if (pos != v.size() || !(o.temperature > 0.0)) throw bad();
    o.strategy = Strategy::Temperature;
    return o;
  }
  if (spec.starts_with("topk:")) {
    const auto v = spec.substr(5);
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), o.top_k);
    if (ec != std::errc() || ptr != v.data() + v.size() || o.top_k == 0) throw bad();
    o.strategy = Strategy::TopK;
    return o;
  }
  throw bad();
}

TokenId pick_token(std::span<const float> logits, const GenerateOptions& options,
                   const std::vector<bool>& allowed, std::mt19937_64& rng) {
  std::vector<TokenId> candidates;
  for (std::size_t i = 0; i < logits.size() && i < allowed.size(); ++i)
    if (allowed[i]) candidates.push_back(static_cast<TokenId>(i));
  if (candidates.empty()) throw UsageError("generate: no token may be sampled");

  // Highest logit first; equal logits keep the lower id first.
  const auto by_logit = [&](TokenId a, TokenId b) {
    return logits[a] != logits[b] ? logits[a] > logits[b] : a < b;
  };

  switch (options.strategy) {
    case GenerateOptions::Strategy::Greedy:
      return *std::min_element(candidates.begin(), candidates.end(), by_logit);
    case GenerateOptions::Strategy::TopK: {
      const std::size_t k = std::min(options.top_k, candidates.size());
      std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(), by_logit);
      candidates.resize(k);
      break;
    }
    case GenerateOptions::Strategy::Temperature:
      break;
  }
  const double tau = options.strategy == GenerateOptions::Strategy::TopK ? 1.0 : options.temperature;
  double max_logit = -INFINITY;
  for (TokenId id : candidates) max_logit = std::max(max_logit, static_cast<double>(logits[id]));
  std::vector<std::pair<double, TokenId>> weighted;
  weighted.reserve(candidates.size());
  for (TokenId id : candidates)
    weighted.emplace_back(std::exp((static_cast<double>(logits[id]) - max_logit) / tau), id);
  return sample(weighted, uniform01(rng));
}

Generation generate(const Parameters& params, const bpe::Tokenizer& tokenizer,
                    std::string_view prompt, const GenerateOptions& options) {
  const ModelConfig& config = params.config();
  std::vector<TokenId> context;
  if (options.prepend_bos) context.push_back(tokenizer.special_id(bpe::Special::Bos));
  const auto prompt_ids = tokenizer.encode(prompt);
  context.insert(context.end(), prompt_ids.begin(), prompt_ids.end());
  if (context.empty()) throw UsageError("generate: empty prompt without a bos token");
  const std::size_t window = std::max<std::size_t>(1, config.context_window - 1);
  if (context.size() > window)
    throw UsageError("generate: prompt has " + std::to_string(context.size()) +
                     " tokens, at most " + std::to_string(window) + " fit the context window");

  const TokenId eot = tokenizer.special_id(bpe::Special::EndOfText);
  std::vector<bool> allowed(config.vocab_size, false);
  for (std::size_t i = 0; i < std::min(config.vocab_size, tokenizer.vocab_size()); ++i)
    allowed[i] = !tokenizer.is_special(static_cast<TokenId>(i)) || i == eot;

  std::mt19937_64 rng(options.seed);
  Generation gen;
  for (std::size_t step = 0; step < options.max_new; ++step) {
    const std::size_t start = context.size() > window ? context.size() - window : 0;
    const std::span<const TokenId> input(context.data() + start, context.size() - start);
    const Tensor logits = forward(params, input);
    const auto last = logits.data().subspan((input.size() - 1) * config.vocab_size, config.vocab_size);
    const TokenId next = pick_token(last, options, allowed, rng);
    if (next == eot) {
      gen.stopped_at_end = true;
      break;
    }
    gen.tokens.push_back(next);
    context.push_back(next);
  }
  gen.text = decode_lossy(tokenizer, gen.tokens);
  return gen;
}

}  // namespace hllm::model
