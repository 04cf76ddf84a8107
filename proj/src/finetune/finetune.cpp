#include <algorithm>
#include <cmath>

#include "hllm/error.hpp"
#include "hllm/finetune.hpp"
#include "hllm/parallel.hpp"

namespace hllm::finetune {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

namespace {

constexpr std::string_view kHeadWeight = "head.w";
constexpr std::string_view kHeadBias = "head.b";

void keep_tail(TokenSeq& ids, std::size_t n, Truncation truncation) {
  if (ids.size() <= n) return;
  if (truncation == Truncation::Front)
    ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(n));
  else
    ids.resize(n);
}

// Shortens a then b (each by the policy) until a.size() + b.size() <= budget.
void fit_pair(TokenSeq& a, TokenSeq& b, std::size_t budget, Truncation truncation) {
  if (a.size() + b.size() <= budget) return;
  const std::size_t over = a.size() + b.size() - budget;
  const std::size_t from_a = std::min(over, a.size());
  keep_tail(a, a.size() - from_a, truncation);
  keep_tail(b, budget - a.size(), truncation);
}

std::size_t min_context(TaskKind kind) {
  switch (kind) {
    case TaskKind::Classification: return 2;
    case TaskKind::Pair:
    case TaskKind::MultipleChoice: return 3;
    case TaskKind::Translation: return 4;
  }
  return 4;
}

template <typename T>
Var<T> last_row(Var<T> h) {
  const std::size_t t = h.shape()[0];
  return tensor::transpose(tensor::slice_cols(tensor::transpose(h), t - 1, 1));
}

struct HeadIndex {
  std::size_t weight, bias;
};

HeadIndex head_index(const Parameters& params) {
  const auto w = params.find(kHeadWeight), b = params.find(kHeadBias);
  if (!w || !b) throw UsageError("model has no task head");
  return {*w, *b};
}

// [1, k] head logits at the last position.
Var<float> head_forward(const Parameters& params, std::span<const Var<float>> vars,
                        std::span<const TokenId> ids, HeadIndex head) {
  const Var<float> h = model::hidden_states<float>(params.config(), vars, ids);
  return tensor::add(tensor::matmul(last_row(h), vars[head.weight]), vars[head.bias]);
}

std::uint32_t u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

}  // namespace

TaskKind parse_task_kind(std::string_view name) {
  if (name == "cls") return TaskKind::Classification;
  if (name == "pair") return TaskKind::Pair;
  if (name == "mc") return TaskKind::MultipleChoice;
  if (name == "translate") return TaskKind::Translation;
  throw UsageError("unknown task '" + std::string(name) + "' (cls|pair|mc|translate)");
}

std::string_view task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::Classification: return "cls";
    case TaskKind::Pair: return "pair";
    case TaskKind::MultipleChoice: return "mc";
    case TaskKind::Translation: return "translate";
  }
  return "?";
}

Direction parse_direction(std::string_view s) {
  if (s == "hi2en") return Direction::HiToEn;
  if (s == "en2hi") return Direction::EnToHi;
  throw DataError("bad translation direction '" + std::string(s) + "' (hi2en|en2hi)");
}

void TaskSpec::validate() const {
  if ((kind == TaskKind::Classification || kind == TaskKind::Pair) && num_classes < 2)
    throw UsageError("classification needs at least 2 classes");
  if (!(learning_rate >= 0.0)) throw UsageError("learning rate must be >= 0");
  if (batch_size == 0) throw UsageError("batch size must be positive");
  if (weight_decay < 0.0 || grad_clip < 0.0) throw UsageError("invalid optimizer hyper-parameters");
}

std::size_t TaskSpec::head_outputs() const {
  switch (kind) {
    case TaskKind::Classification:
    case TaskKind::Pair: return num_classes;
    case TaskKind::MultipleChoice: return 1;
    case TaskKind::Translation: return 0;
  }
  return 0;
}

std::vector<TokenSeq> encode_for_task(const bpe::Tokenizer& tokenizer, TaskKind kind,
                                      const LabeledExample& example, std::size_t n_ctx,
                                      Truncation truncation) {
  if (kind == TaskKind::Translation)
    throw UsageError("encode_for_task: use encode_translation for translation examples");
  if (n_ctx < min_context(kind))
    throw UsageError("context window " + std::to_string(n_ctx) + " is too small for task '" +
                     std::string(task_kind_name(kind)) + "'");
  const TokenId bos = tokenizer.special_id(bpe::Special::Bos);
  const TokenId sep = tokenizer.special_id(bpe::Special::Sep);
  const TokenId cls = tokenizer.special_id(bpe::Special::Cls);

  const auto join = [&](TokenSeq a, std::optional<TokenSeq> b) {
    TokenSeq out{bos};
    if (b) {
      fit_pair(a, *b, n_ctx - 3, truncation);
      out.insert(out.end(), a.begin(), a.end());
      out.push_back(sep);
      out.insert(out.end(), b->begin(), b->end());
    } else {
      keep_tail(a, n_ctx - 2, truncation);
      out.insert(out.end(), a.begin(), a.end());
    }
    out.push_back(cls);
    return out;
  };

  std::vector<TokenSeq> seqs;
  switch (kind) {
    case TaskKind::Classification:
      seqs.push_back(join(tokenizer.encode(example.text), std::nullopt));
      break;
    case TaskKind::Pair:
      seqs.push_back(join(tokenizer.encode(example.text), tokenizer.encode(example.text_b)));
      break;
    case TaskKind::MultipleChoice: {
      const TokenSeq context = tokenizer.encode(example.text);
      for (const auto& cand : example.candidates) seqs.push_back(join(context, tokenizer.encode(cand)));
      break;
    }
    case TaskKind::Translation:
      break;
  }
  return seqs;
}

TranslationSeq encode_translation(const bpe::Tokenizer& tokenizer, const LabeledExample& example,
                                  std::size_t n_ctx) {
  if (n_ctx < min_context(TaskKind::Translation))
    throw UsageError("context window " + std::to_string(n_ctx) + " is too small for translation");
  TokenSeq src = tokenizer.encode(example.text);
  TokenSeq tgt = tokenizer.encode(example.text_b);
  // The source loses its front first; the target is cut at the back only
  // when it alone overflows.
  const std::size_t budget = n_ctx - 3;
  if (tgt.size() > budget) tgt.resize(budget);
  keep_tail(src, budget - tgt.size(), Truncation::Front);
  TranslationSeq out;
  out.ids.push_back(tokenizer.special_id(bpe::Special::Bos));
  out.ids.insert(out.ids.end(), src.begin(), src.end());
  out.ids.push_back(tokenizer.special_id(bpe::Special::Sep));
  out.target_begin = out.ids.size();
  out.ids.insert(out.ids.end(), tgt.begin(), tgt.end());
  out.ids.push_back(tokenizer.special_id(bpe::Special::EndOfText));
  return out;
}

Parameters attach_head(const Parameters& base, std::size_t num_outputs, std::uint64_t seed) {
  if (num_outputs == 0) throw UsageError("attach_head: num_outputs must be positive");
  if (has_head(base)) throw UsageError("attach_head: model already has a task head");
  Parameters out = base;
  const std::size_t d = base.config().embed_dim;
  Tensor w({d, num_outputs});
  model::NormalSampler(seed).fill(w.data(), 0.0, 0.02);
  out.add(std::string(kHeadWeight), std::move(w));
  out.add(std::string(kHeadBias), Tensor({num_outputs}));
  return out;
}

bool has_head(const Parameters& params) {
  return params.find(kHeadWeight).has_value() || params.find(kHeadBias).has_value();
}

std::vector<float> head_logits(const Parameters& params, std::span<const TokenId> ids) {
  const HeadIndex head = head_index(params);
  Tape<float> tape;
  const auto vars = model::bind(tape, params, false);
  const auto v = head_forward(params, vars, ids, head).value();
  return {v.begin(), v.end()};
}

namespace {

// Scalar training loss for one example on `tape`.
Var<float> example_loss(const Parameters& params, std::span<const Var<float>> vars,
                        const bpe::Tokenizer& tokenizer, const TaskSpec& spec,
                        const LabeledExample& ex) {
  const std::size_t n_ctx = params.config().context_window;
  if (spec.kind == TaskKind::Translation) {
    const TranslationSeq seq = encode_translation(tokenizer, ex, n_ctx);
    constexpr std::uint32_t kNoTarget = 0xFFFFFFFFu;
    std::vector<std::uint32_t> targets(seq.ids.size(), kNoTarget);
    for (std::size_t i = seq.target_begin; i < seq.ids.size(); ++i) targets[i - 1] = seq.ids[i];
    const Var<float> h = model::hidden_states<float>(params.config(), vars, seq.ids);
    return tensor::cross_entropy_logits(model::lm_head<float>(vars, h),
                                        std::span<const std::uint32_t>(targets), kNoTarget);
  }
  const HeadIndex head = head_index(params);
  const auto seqs = encode_for_task(tokenizer, spec.kind, ex, n_ctx, spec.truncation);
  const std::uint32_t target[] = {u32(ex.label)};
  if (spec.kind == TaskKind::MultipleChoice) {
    std::vector<Var<float>> scores;
    for (const auto& s : seqs) scores.push_back(head_forward(params, vars, s, head));
    return tensor::cross_entropy_logits(tensor::concat_cols<float>(scores), std::span<const std::uint32_t>(target));
  }
  return tensor::cross_entropy_logits(head_forward(params, vars, seqs.front(), head),
                                      std::span<const std::uint32_t>(target));
}

void check_example(const TaskSpec& spec, const LabeledExample& ex, std::size_t index) {
  const std::size_t bound = spec.kind == TaskKind::MultipleChoice ? kChoices : spec.num_classes;
  if (spec.kind != TaskKind::Translation && ex.label >= bound)
    throw DataError("example " + std::to_string(index + 1) + ": label " + std::to_string(ex.label) +
                    " out of range for " + std::to_string(bound) + " outputs");
}

}  // namespace

FinetuneResult finetune(const train::Checkpoint& base, const bpe::Tokenizer& tokenizer,
                        const TaskSpec& spec, std::span<const LabeledExample> examples,
                        const FinetuneOptions& options) {
  spec.validate();
  if (base.tokenizer_digest != tokenizer.digest())
    throw DataError("checkpoint was trained with a different tokenizer (digest mismatch)");
  if (base.config.vocab_size < tokenizer.vocab_size())
    throw UsageError("model vocab_size " + std::to_string(base.config.vocab_size) +
                     " is smaller than the tokenizer vocabulary " + std::to_string(tokenizer.vocab_size()));
  if (examples.empty()) throw UsageError("finetune: empty training set");
  for (std::size_t i = 0; i < examples.size(); ++i) check_example(spec, examples[i], i);

  FinetuneResult result;
  train::Checkpoint& ckpt = result.checkpoint;
  ckpt.config = base.config;
  ckpt.tokenizer_digest = base.tokenizer_digest;
  ckpt.step = 0;
  ckpt.params = spec.kind == TaskKind::Translation ? base.params
                                                   : attach_head(base.params, spec.head_outputs(), spec.seed);
  ckpt.extra["task"] = std::string(task_kind_name(spec.kind));
  ckpt.extra["num_classes"] = std::to_string(spec.num_classes);
  ckpt.extra["base_step"] = std::to_string(base.step);

  train::TrainConfig opt;
  opt.learning_rate = spec.learning_rate;
  opt.batch_size = spec.batch_size;
  opt.weight_decay = spec.weight_decay;
  opt.grad_clip = spec.grad_clip;
  train::OptimState state = train::OptimState::zeros_like(ckpt.params);

  const std::size_t n = examples.size();
  std::vector<Tensor> grads;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    const auto order = train::seeded_permutation(n, spec.seed ^ (0xD1B54A32D192ED03ull * (epoch + 1)));
    for (std::size_t begin = 0; begin < n; begin += spec.batch_size) {
      const std::size_t end = std::min(n, begin + spec.batch_size);
      Tape<float> tape;
      const auto vars = model::bind(tape, ckpt.params, true);
      Var<float> total;
      for (std::size_t i = begin; i < end; ++i) {
        const Var<float> loss = example_loss(ckpt.params, vars, tokenizer, spec, examples[order[i]]);
        total = total.valid() ? tensor::add(total, loss) : loss;
      }
      const Var<float> mean = tensor::scale(total, 1.0f / static_cast<float>(end - begin));
      const double loss = mean.value()[0];
      if (!std::isfinite(loss))
        throw NumericError("fine-tuning loss became non-finite at step " + std::to_string(step + 1));
      tape.backward(mean);
      grads.clear();
      for (const auto& v : vars) grads.push_back(tape.grad(v));
      train::adamw_step(ckpt.params, grads, state, opt);
      ++step;
      ckpt.step = step;
      result.losses.push_back(loss);
      if (options.on_step && !options.on_step(step, loss, ckpt.params)) return result;
    }
  }
  return result;
}

TaskSpec task_of(const train::Checkpoint& ckpt) {
  const auto task = ckpt.extra.find("task");
  if (task == ckpt.extra.end()) throw UsageError("checkpoint is not fine-tuned (no task recorded)");
  TaskSpec spec;
  spec.kind = parse_task_kind(task->second);
  if (const auto k = ckpt.extra.find("num_classes"); k != ckpt.extra.end()) {
    try {
      spec.num_classes = std::stoull(k->second);
    } catch (const std::exception&) {
      throw DataError("checkpoint has a malformed num_classes entry");
    }
  }
  return spec;
}

std::vector<std::size_t> predict_classes(const Parameters& params, const bpe::Tokenizer& tokenizer,
                                         const TaskSpec& spec, std::span<const LabeledExample> examples,
                                         std::size_t threads) {
  if (spec.kind != TaskKind::Classification && spec.kind != TaskKind::Pair)
    throw UsageError("predict_classes: task is not a classification task");
  std::vector<std::size_t> out(examples.size());
  parallel_for(examples.size(), static_cast<unsigned>(threads), [&](std::size_t i) {
    const auto seqs = encode_for_task(tokenizer, spec.kind, examples[i], params.config().context_window,
                                      spec.truncation);
    const auto logits = head_logits(params, seqs.front());
    const std::vector<double> v(logits.begin(), logits.end());
    out[i] = argmax(v);
  });
  return out;
}

MetricsReport eval_classification(const Parameters& params, const bpe::Tokenizer& tokenizer,
                                  const TaskSpec& spec, std::span<const LabeledExample> examples,
                                  std::size_t threads) {
  if (examples.empty()) throw UsageError("eval_classification: no examples");
  for (std::size_t i = 0; i < examples.size(); ++i) check_example(spec, examples[i], i);
  const auto predicted = predict_classes(params, tokenizer, spec, examples, threads);
  std::vector<std::size_t> truth;
  for (const auto& ex : examples) truth.push_back(ex.label);
  return metrics_from_predictions(truth, predicted, spec.num_classes);
}

std::array<double, kChoices> choice_scores(const Parameters& params, const bpe::Tokenizer& tokenizer,
                                           const LabeledExample& example) {
  const auto seqs = encode_for_task(tokenizer, TaskKind::MultipleChoice, example,
                                    params.config().context_window);
  std::array<double, kChoices> scores{};
  for (std::size_t c = 0; c < kChoices; ++c) scores[c] = head_logits(params, seqs[c]).at(0);
  return scores;
}

std::array<double, kChoices> choice_probabilities(std::span<const double, kChoices> scores) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::array<double, kChoices> p{};
  double z = 0.0;
  for (std::size_t c = 0; c < kChoices; ++c) z += p[c] = std::exp(scores[c] - mx);
  for (double& x : p) x /= z;
  return p;
}

std::vector<std::size_t> predict_choices(const Parameters& params, const bpe::Tokenizer& tokenizer,
                                         std::span<const LabeledExample> examples, std::size_t threads) {
  std::vector<std::size_t> out(examples.size());
  parallel_for(examples.size(), static_cast<unsigned>(threads), [&](std::size_t i) {
    const auto s = choice_scores(params, tokenizer, examples[i]);
    out[i] = argmax(s);
  });
  return out;
}

double eval_multiple_choice(const Parameters& params, const bpe::Tokenizer& tokenizer,
                            std::span<const LabeledExample> examples, std::size_t threads) {
  if (examples.empty()) throw UsageError("eval_multiple_choice: no examples");
  const auto predicted = predict_choices(params, tokenizer, examples, threads);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) correct += predicted[i] == examples[i].label;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

}  // namespace hllm::finetune
