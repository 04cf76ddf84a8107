#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hllm/autograd.hpp"
#include "hllm/tensor.hpp"
#include "hllm/tokenizer.hpp"

// Decoder-only pre-norm transformer in the GPT-2 layout: learned absolute
// positions, tanh GELU MLP of width 4d, output head tied to the token
// embedding.
namespace hllm::model {

using bpe::TokenId;
using tensor::BasicTensor;
using tensor::Tensor;

struct ModelConfig {
  std::size_t vocab_size = 256;
  std::size_t embed_dim = 8;
  std::size_t layers = 1;
  std::size_t heads = 2;
  std::size_t context_window = 16;
  bool tie_output = true;

  // Throws UsageError when the invariants (d % H == 0, n_ctx >= 1, V >= 1) fail.
  void validate() const;
  std::size_t head_dim() const { return embed_dim / heads; }

  // GPT-2 small/medium shapes at the 50008-token vocabulary, and a toy shape for tests.
  static ModelConfig small();
  static ModelConfig medium();
  static ModelConfig tiny();
  // "small" | "medium" | "tiny"; UsageError otherwise.
  static ModelConfig preset(std::string_view name);

  std::map<std::string, std::string> to_map() const;
  // Reads the keys written by to_map(); `preset=<name>` seeds defaults.
  static ModelConfig from_map(const std::map<std::string, std::string>& kv);

  bool operator==(const ModelConfig&) const = default;
};

// V*d + n_ctx*d + L*(12d^2 + 13d) + 2d. The tied head adds nothing.
std::uint64_t count_params(const ModelConfig& config);

// Parameters as an ordered list of named tensors. The first 4 + 12*L
// entries follow the fixed layout below; fine-tuning heads are appended.
template <typename T>
class BasicParameters {
 public:
  // Per-layer tensor order.
  enum Slot : std::size_t {
    kLn1Gain, kLn1Bias, kQkvWeight, kQkvBias, kProjWeight, kProjBias,
    kLn2Gain, kLn2Bias, kFcWeight, kFcBias, kFcProjWeight, kFcProjBias, kSlotsPerLayer
  };

  BasicParameters() = default;
  // All-zero tensors with the right shapes (layer-norm gains 1).
  explicit BasicParameters(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  BasicTensor<T>& tensor(std::size_t i) { return tensors_[i]; }
  const BasicTensor<T>& tensor(std::size_t i) const { return tensors_[i]; }

  std::optional<std::size_t> find(std::string_view name) const;
  BasicTensor<T>& at(std::string_view name);
  const BasicTensor<T>& at(std::string_view name) const;
  void add(std::string name, BasicTensor<T> value);

  static constexpr std::size_t token_embedding() { return 0; }
  static constexpr std::size_t position_embedding() { return 1; }
  std::size_t layer_slot(std::size_t layer, Slot slot) const { return 2 + layer * kSlotsPerLayer + slot; }
  std::size_t final_gain() const { return 2 + config_.layers * kSlotsPerLayer; }
  std::size_t final_bias() const { return final_gain() + 1; }

  std::uint64_t element_count() const;

  template <typename U>
  BasicParameters<U> cast() const {
    BasicParameters<U> out;
    out.config_ = config_;
    out.names_ = names_;
    for (const auto& t : tensors_) out.tensors_.push_back(t.template cast<U>());
    return out;
  }

  bool operator==(const BasicParameters&) const = default;

 private:
  template <typename U>
  friend class BasicParameters;

  ModelConfig config_;
  std::vector<std::string> names_;
  std::vector<BasicTensor<T>> tensors_;
};

using Parameters = BasicParameters<float>;

// Normal(0, 0.02) weights, residual projections scaled by 1/sqrt(2L), zero
// biases, unit layer-norm gains. Bit-identical for equal seeds.
Parameters init_params(const ModelConfig& config, std::uint64_t seed);

// Normal(mean, stddev) draws from a 64-bit Mersenne Twister via Box-Muller,
// so results do not depend on the standard library's distributions.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}
  double next(double mean, double stddev);
  void fill(std::span<float> out, double mean, double stddev);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// Uniform draw in [0, 1) from the top 53 bits of one engine output.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Leaves for every parameter tensor on `tape`, in parameter order.
template <typename T>
std::vector<tensor::Var<T>> bind(tensor::Tape<T>& tape, const BasicParameters<T>& params,
                                 bool requires_grad = true);

// Optional capture of per-layer, per-head attention probabilities [t,t].
template <typename T>
struct AttentionProbe {
  std::vector<BasicTensor<T>> probs;  // index = layer * heads + head
};

// Final (layer-normed) hidden states [t,d]. Throws UsageError when ids is
// empty, longer than the context window, or holds an id >= V.
template <typename T>
tensor::Var<T> hidden_states(const ModelConfig& config, std::span<const tensor::Var<T>> params,
                             std::span<const TokenId> ids, AttentionProbe<T>* probe = nullptr);

// hidden [t,d] x token_embedding^T -> logits [t,V].
template <typename T>
tensor::Var<T> lm_head(std::span<const tensor::Var<T>> params, tensor::Var<T> hidden);

// One transformer block on x [t,d]; `layer_params` are that layer's 12 tensors.
template <typename T>
tensor::Var<T> block(const ModelConfig& config, std::span<const tensor::Var<T>> layer_params,
                     tensor::Var<T> x, std::vector<BasicTensor<T>>* probe_probs = nullptr);

// Pure inference: logits [t,V].
Tensor forward(const Parameters& params, std::span<const TokenId> ids);

struct GenerateOptions {
  enum class Strategy { Greedy, Temperature, TopK };
  Strategy strategy = Strategy::Greedy;
  double temperature = 1.0;
  std::size_t top_k = 1;
  std::size_t max_new = 32;
  std::uint64_t seed = 0;
  // Start from the bos special; required for an empty prompt.
  bool prepend_bos = false;

  // "greedy" | "temp:<tau>" | "topk:<k>"
  static GenerateOptions parse_strategy(std::string_view spec);
};

struct Generation {
  std::vector<TokenId> tokens;  // newly generated, excluding any end-of-text
  std::string text;             // decoded continuation, invalid UTF-8 replaced by U+FFFD
  bool stopped_at_end = false;
};

// Autoregressive continuation of `prompt`. Specials other than end-of-text
// are never sampled. Context beyond n_ctx - 1 tokens slides.
Generation generate(const Parameters& params, const bpe::Tokenizer& tokenizer,
                    std::string_view prompt, const GenerateOptions& options);

// Next-token choice from one row of logits; exposed for tests.
TokenId pick_token(std::span<const float> logits, const GenerateOptions& options,
                   const std::vector<bool>& allowed, std::mt19937_64& rng);

}  // namespace hllm::model
