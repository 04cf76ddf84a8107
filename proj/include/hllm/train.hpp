#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hllm/model.hpp"
#include "hllm/tokenizer.hpp"

namespace hllm::train {

using bpe::TokenId;
using bpe::TokenSeq;
using model::ModelConfig;
using model::Parameters;
using tensor::Tensor;

struct TrainConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 16;
  std::size_t total_steps = 0;
  std::size_t window = 1024;  // must not exceed the model's context window
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0: evaluate and checkpoint only at the end
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 1.0;  // global L2 norm; 0 disables clipping

  void validate(const ModelConfig& model) const;
};

struct OptimState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  // Zero moments shaped like `params`.
  static OptimState zeros_like(const Parameters& params);
  bool operator==(const OptimState&) const = default;
};

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  ModelConfig config;
  Parameters params;
  std::optional<OptimState> optim;
  std::uint64_t step = 0;
  std::string tokenizer_digest;
  // Extra key=value pairs carried in the config block (fine-tuning metadata).
  std::map<std::string, std::string> extra;

  bool operator==(const Checkpoint&) const = default;
};

// Binary little-endian layout: "HLLM", u32 version, u32-length-prefixed
// key=value config block, tensor table, optional optimizer section behind a
// presence byte, trailing CRC32 over everything before it.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
// Writes to a temporary sibling file, then renames over `path`.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EvalReport {
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;
  double perplexity = 0.0;
  double train_loss = 0.0;
};

inline double perplexity_from_loss(double loss) { return std::exp(loss); }

// Encodes documents, appends end-of-text after each, and slices the stream
// into non-overlapping windows; the partial tail is dropped.
std::vector<TokenSeq> pack_corpus(const bpe::Tokenizer& tokenizer,
                                  std::span<const std::string> documents, std::size_t window);

// Next-token cross entropy: logits[0..t-2] against ids[1..t-1].
template <typename T>
tensor::Var<T> clm_loss(tensor::Var<T> logits, std::span<const TokenId> ids);

// Global-norm clipping followed by one AdamW update. Rank-1 tensors (biases,
// layer-norm gains and biases) are excluded from weight decay. Throws
// NumericError, leaving everything untouched, when a gradient is not finite.
// Returns the pre-clipping gradient norm.
double adamw_step(Parameters& params, std::span<const Tensor> grads, OptimState& state,
                  const TrainConfig& config);

// Mean clm_loss over examples, top-1 next-token accuracy, exp(loss).
EvalReport evaluate(const Parameters& params, std::span<const TokenSeq> examples);

// Fisher-Yates permutation of [0, n) from a 64-bit Mersenne Twister.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

struct MetricsRow {
  std::uint64_t step = 0;
  double train_loss = 0.0;
  std::optional<EvalReport> eval;
};

// "step\ttrain_loss\teval_loss\teval_acc\tperplexity"; eval columns empty on non-eval rows.
std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);

struct PretrainOptions {
  // When set, checkpoints are written here every checkpoint_every steps and at the end.
  std::optional<std::filesystem::path> checkpoint_path;
  std::function<void(const MetricsRow&)> on_row;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<MetricsRow> log;
  EvalReport final_eval;
  double final_train_perplexity = 0.0;  // exp of the mean loss over the training split
};

// CLM pre-training from a seeded initialization. The final 1% of packed
// examples (at least one, when there are two or more) is held out.
PretrainResult pretrain(const ModelConfig& config, const bpe::Tokenizer& tokenizer,
                        std::span<const std::string> documents, const TrainConfig& train,
                        const PretrainOptions& options = {});

}  // namespace hllm::train
