#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hllm/model.hpp"
#include "hllm/tokenizer.hpp"
#include "hllm/train.hpp"

namespace hllm::finetune {

using bpe::TokenId;
using bpe::TokenSeq;
using model::Parameters;

enum class TaskKind { Classification, Pair, MultipleChoice, Translation };

// "cls" | "pair" | "mc" | "translate"
TaskKind parse_task_kind(std::string_view name);
std::string_view task_kind_name(TaskKind kind);

enum class Truncation { Front, Back };

inline constexpr std::size_t kChoices = 4;

struct TaskSpec {
  TaskKind kind = TaskKind::Classification;
  std::size_t num_classes = 2;  // classification and pair tasks
  Truncation truncation = Truncation::Front;
  double learning_rate = 5e-6;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  std::size_t batch_size = 8;
  double weight_decay = 0.01;
  double grad_clip = 1.0;

  void validate() const;
  // Width of the linear head: num_classes, 1 for multiple-choice, 0 for translation.
  std::size_t head_outputs() const;
};

enum class Direction { HiToEn, EnToHi };
Direction parse_direction(std::string_view s);  // "hi2en" | "en2hi"

// One struct for every task kind. Classification uses text + label; pair
// tasks add text_b; multiple-choice uses text as context, the candidates and
// label as answer index; translation uses text as source, text_b as target.
struct LabeledExample {
  std::string text;
  std::string text_b;
  std::array<std::string, kChoices> candidates;
  std::size_t label = 0;
  Direction direction = Direction::HiToEn;

  bool operator==(const LabeledExample&) const = default;
};

// Model inputs for one example. Classification and pair tasks give one
// sequence ending in cls; multiple-choice gives one per candidate. Overlong
// text is cut (from the front by default) so the cls id always survives.
std::vector<TokenSeq> encode_for_task(const bpe::Tokenizer& tokenizer, TaskKind kind,
                                      const LabeledExample& example, std::size_t n_ctx,
                                      Truncation truncation = Truncation::Front);

// bos + source + sep + target + eot; the loss covers [target_begin, size).
struct TranslationSeq {
  TokenSeq ids;
  std::size_t target_begin = 0;
};
TranslationSeq encode_translation(const bpe::Tokenizer& tokenizer, const LabeledExample& example,
                                  std::size_t n_ctx);

// Appends "head.w" [d, num_outputs] ~ Normal(0, 0.02) and "head.b" zeros.
Parameters attach_head(const Parameters& base, std::size_t num_outputs, std::uint64_t seed);
bool has_head(const Parameters& params);

// Head logits [num_outputs] at the final (cls) position of one sequence.
std::vector<float> head_logits(const Parameters& params, std::span<const TokenId> ids);

struct FinetuneOptions {
  // Called after every optimizer step; returning false stops training.
  std::function<bool(std::size_t step, double loss, const Parameters& params)> on_step;
};

struct FinetuneResult {
  train::Checkpoint checkpoint;  // params with head; extra carries the task
  std::vector<double> losses;    // one per step
};

// Full-model AdamW fine-tuning. Throws DataError when the checkpoint was
// trained with a different tokenizer and UsageError on an empty training set.
FinetuneResult finetune(const train::Checkpoint& base, const bpe::Tokenizer& tokenizer,
                        const TaskSpec& spec, std::span<const LabeledExample> examples,
                        const FinetuneOptions& options = {});

// Task metadata stored by finetune() in Checkpoint::extra.
TaskSpec task_of(const train::Checkpoint& ckpt);

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<double> precision, recall, f1;  // per class
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  std::vector<std::vector<std::uint64_t>> confusion;  // [truth][predicted]
};

// Precision is 0 for a class never predicted, recall 0 for a class never
// present, F1 0 when precision + recall is 0. Macro values are unweighted means.
MetricsReport metrics_from_confusion(std::vector<std::vector<std::uint64_t>> confusion);
MetricsReport metrics_from_predictions(std::span<const std::size_t> truth,
                                       std::span<const std::size_t> predicted, std::size_t num_classes);

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

// Predictions by argmax over head logits, evaluated in parallel.
std::vector<std::size_t> predict_classes(const Parameters& params, const bpe::Tokenizer& tokenizer,
                                         const TaskSpec& spec, std::span<const LabeledExample> examples,
                                         std::size_t threads = 0);
MetricsReport eval_classification(const Parameters& params, const bpe::Tokenizer& tokenizer,
                                  const TaskSpec& spec, std::span<const LabeledExample> examples,
                                  std::size_t threads = 0);

std::array<double, kChoices> choice_scores(const Parameters& params, const bpe::Tokenizer& tokenizer,
                                           const LabeledExample& example);
std::array<double, kChoices> choice_probabilities(std::span<const double, kChoices> scores);
std::vector<std::size_t> predict_choices(const Parameters& params, const bpe::Tokenizer& tokenizer,
                                         std::span<const LabeledExample> examples, std::size_t threads = 0);
double eval_multiple_choice(const Parameters& params, const bpe::Tokenizer& tokenizer,
                            std::span<const LabeledExample> examples, std::size_t threads = 0);

struct HumanEvalDistribution {
  std::array<std::uint64_t, 5> counts{};  // index = score 0..4; zero when built from fractions
  std::array<double, 5> fractions{};      // index = score 0..4
  double mean = 0.0;
};

// Ratings must each be in 0..4; DataError otherwise or when empty.
HumanEvalDistribution aggregate_human_eval(std::span<const int> ratings);
// Non-negative weights for scores 4, 3, 2, 1, 0 (percentages or fractions);
// they are normalized to sum to 1.
HumanEvalDistribution aggregate_human_eval_distribution(std::span<const double, 5> weights_4_to_0);

// TSV ingestion, one example per line; errors carry the 1-based line number.
std::vector<LabeledExample> read_task_data(std::istream& in, const TaskSpec& spec);
std::vector<LabeledExample> load_task_data(const std::filesystem::path& path, const TaskSpec& spec);
std::vector<int> read_ratings(std::istream& in);

}  // namespace hllm::finetune
