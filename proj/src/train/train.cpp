#include <cmath>
#include <cstdio>
#include <random>

#include "hllm/error.hpp"
#include "hllm/kernels.hpp"
#include "hllm/train.hpp"

namespace hllm::train {

using tensor::Tape;
using tensor::Var;

void TrainConfig::validate(const ModelConfig& model) const {
  if (!(learning_rate >= 0.0)) throw UsageError("learning rate must be >= 0");
  if (batch_size == 0) throw UsageError("batch size must be positive");
  if (window < 2) throw UsageError("window must be at least 2 tokens");
  if (window > model.context_window)
    throw UsageError("window " + std::to_string(window) + " exceeds the model context window " +
                     std::to_string(model.context_window));
  if (weight_decay < 0.0 || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || eps <= 0.0 ||
      grad_clip < 0.0)
    throw UsageError("invalid optimizer hyper-parameters");
}

std::vector<TokenSeq> pack_corpus(const bpe::Tokenizer& tokenizer,
                                  std::span<const std::string> documents, std::size_t window) {
  if (window < 2) throw UsageError("pack_corpus: window must be at least 2");
  TokenSeq stream;
  const TokenId eot = tokenizer.special_id(bpe::Special::EndOfText);
  for (const auto& doc : documents) {
    const auto ids = tokenizer.encode(doc);
    stream.insert(stream.end(), ids.begin(), ids.end());
    stream.push_back(eot);
  }
  if (documents.empty()) throw DataError("pack_corpus: empty token stream");
  std::vector<TokenSeq> examples;
  examples.reserve(stream.size() / window);
  for (std::size_t start = 0; start + window <= stream.size(); start += window)
    examples.emplace_back(stream.begin() + static_cast<std::ptrdiff_t>(start),
                          stream.begin() + static_cast<std::ptrdiff_t>(start + window));
  return examples;
}

template <typename T>
Var<T> clm_loss(Var<T> logits, std::span<const TokenId> ids) {
  const std::size_t t = ids.size();
  if (t < 2) throw UsageError("clm_loss needs at least 2 tokens");
  if (logits.shape().size() != 2 || logits.shape()[0] != t)
    throw UsageError("clm_loss: logits shape " + tensor::shape_str(logits.shape()) + " for " +
                     std::to_string(t) + " tokens");
  // Row t-1 has no next token; it is ignored through a sentinel target.
  std::vector<std::uint32_t> targets(ids.begin() + 1, ids.end());
  constexpr std::uint32_t kNoTarget = 0xFFFFFFFFu;
  targets.push_back(kNoTarget);
  return tensor::cross_entropy_logits(logits, std::span<const std::uint32_t>(targets), kNoTarget);
}

template Var<float> clm_loss(Var<float>, std::span<const TokenId>);
template Var<double> clm_loss(Var<double>, std::span<const TokenId>);
template Var<long double> clm_loss(Var<long double>, std::span<const TokenId>);

double adamw_step(Parameters& params, std::span<const Tensor> grads, OptimState& state,
                  const TrainConfig& config) {
  if (grads.size() != params.size())
    throw UsageError("adamw_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " tensors");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw UsageError("adamw_step: optimizer state does not mirror the parameters");
  double sq = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params.tensor(i).shape())
      throw UsageError("adamw_step: gradient shape " + tensor::shape_str(grads[i].shape()) +
                       " for parameter '" + params.name(i) + "'");
    for (float g : grads[i].data()) {
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient for '" + params.name(i) + "'; step aborted");
      sq += static_cast<double>(g) * g;
    }
  }
  const double norm = std::sqrt(sq);
  const float clip = (config.grad_clip > 0.0 && norm > config.grad_clip)
                         ? static_cast<float>(config.grad_clip / (norm + 1e-6))
                         : 1.0f;

  state.step += 1;
  const auto t = static_cast<double>(state.step);
  kernels::AdamWCoeffs c{};
  c.lr = static_cast<float>(config.learning_rate);
  c.beta1 = static_cast<float>(config.beta1);
  c.beta2 = static_cast<float>(config.beta2);
  c.one_minus_beta1 = static_cast<float>(1.0 - config.beta1);
  c.one_minus_beta2 = static_cast<float>(1.0 - config.beta2);
  c.bias_correction1 = static_cast<float>(1.0 - std::pow(config.beta1, t));
  c.bias_correction2 = static_cast<float>(1.0 - std::pow(config.beta2, t));
  c.eps = static_cast<float>(config.eps);
  const float decay = static_cast<float>(config.learning_rate * config.weight_decay);

  const auto& k = kernels::active();
  std::vector<float> clipped;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params.tensor(i).data();
    const float* g = grads[i].data().data();
    if (clip != 1.0f) {
      clipped.assign(grads[i].data().begin(), grads[i].data().end());
      for (float& x : clipped) x *= clip;
      g = clipped.data();
    }
    c.lr_times_decay = params.tensor(i).rank() >= 2 ? decay : 0.0f;
    k.adamw(w.data(), g, state.first_moment[i].data().data(), state.second_moment[i].data().data(),
            w.size(), c);
  }
  return norm;
}

EvalReport evaluate(const Parameters& params, std::span<const TokenSeq> examples) {
  if (examples.empty()) throw UsageError("evaluate: no examples");
  const std::size_t V = params.config().vocab_size;
  double loss_sum = 0.0;
  std::size_t correct = 0, positions = 0;
  for (const auto& ex : examples) {
    Tape<float> tape;
    const auto vars = model::bind(tape, params, false);
    const Var<float> logits = model::lm_head<float>(vars, model::hidden_states<float>(params.config(), vars, ex));
    loss_sum += clm_loss(logits, ex).value()[0];
    const auto lv = logits.value();
    for (std::size_t i = 0; i + 1 < ex.size(); ++i) {
      const float* row = lv.data() + i * V;
      std::size_t best = 0;
      for (std::size_t j = 1; j < V; ++j)
        if (row[j] > row[best]) best = j;
      correct += best == ex[i + 1];
      ++positions;
    }
  }
  EvalReport r;
  r.eval_loss = loss_sum / static_cast<double>(examples.size());
  r.eval_accuracy = static_cast<double>(correct) / static_cast<double>(positions);
  r.perplexity = perplexity_from_loss(r.eval_loss);
  return r;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    // Multiply-shift bounded draw; unbiased enough for shuffling and portable.
    const auto j = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * i) >> 64);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

std::string metrics_header() { return "step\ttrain_loss\teval_loss\teval_acc\tperplexity"; }

std::string format_metrics_row(const MetricsRow& row) {
  char buf[256];
  if (row.eval) {
    std::snprintf(buf, sizeof buf, "%llu\t%.9g\t%.9g\t%.9g\t%.9g",
                  static_cast<unsigned long long>(row.step), row.train_loss, row.eval->eval_loss,
                  row.eval->eval_accuracy, row.eval->perplexity);
  } else {
    std::snprintf(buf, sizeof buf, "%llu\t%.9g\t\t\t", static_cast<unsigned long long>(row.step),
                  row.train_loss);
  }
  return buf;
}

namespace {

// Mean clm_loss over a batch; fills `grads` with d(loss)/d(params).
double batch_gradients(const Parameters& params, std::span<const TokenSeq* const> batch,
                       std::vector<Tensor>& grads) {
  Tape<float> tape;
  const auto vars = model::bind(tape, params, true);
  Var<float> total;
  for (const TokenSeq* ex : batch) {
    const Var<float> logits = model::lm_head<float>(vars, model::hidden_states<float>(params.config(), vars, *ex));
    const Var<float> loss = clm_loss(logits, *ex);
    total = total.valid() ? tensor::add(total, loss) : loss;
  }
  const Var<float> mean = tensor::scale(total, 1.0f / static_cast<float>(batch.size()));
  tape.backward(mean);
  grads.clear();
  for (const auto& v : vars) grads.push_back(tape.grad(v));
  return mean.value()[0];
}

}  // namespace

PretrainResult pretrain(const ModelConfig& config, const bpe::Tokenizer& tokenizer,
                        std::span<const std::string> documents, const TrainConfig& train,
                        const PretrainOptions& options) {
  config.validate();
  train.validate(config);
  if (config.vocab_size < tokenizer.vocab_size())
    throw UsageError("model vocab_size " + std::to_string(config.vocab_size) +
                     " is smaller than the tokenizer vocabulary " + std::to_string(tokenizer.vocab_size()));

  const std::vector<TokenSeq> packed = pack_corpus(tokenizer, documents, train.window);
  if (packed.empty()) throw DataError("corpus is shorter than one training window");
  const std::size_t held_out = packed.size() >= 2 ? std::max<std::size_t>(1, packed.size() / 100) : 0;
  const std::span<const TokenSeq> train_set(packed.data(), packed.size() - held_out);
  const std::span<const TokenSeq> eval_set =
      held_out ? std::span<const TokenSeq>(packed.data() + train_set.size(), held_out) : train_set;

  PretrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = config;
  ckpt.params = model::init_params(config, train.seed);
  ckpt.optim = OptimState::zeros_like(ckpt.params);
  ckpt.tokenizer_digest = tokenizer.digest();

  const auto emit = [&](MetricsRow row) {
    if (options.on_row) options.on_row(row);
    result.log.push_back(std::move(row));
  };

  std::vector<std::size_t> order;
  std::size_t cursor = 0, epoch = 0;
  std::vector<const TokenSeq*> batch;
  std::vector<Tensor> grads;
  double loss_since_report = 0.0;
  std::size_t steps_since_report = 0;
  for (std::size_t step = 1; step <= train.total_steps; ++step) {
    batch.clear();
    while (batch.size() < train.batch_size) {
      if (cursor == order.size()) {
        order = seeded_permutation(train_set.size(), train.seed ^ (0x9E3779B97F4A7C15ull * (epoch + 1)));
        cursor = 0;
        ++epoch;
      }
      batch.push_back(&train_set[order[cursor++]]);
    }
    const double loss = batch_gradients(ckpt.params, batch, grads);
    if (!std::isfinite(loss)) throw NumericError("training loss became non-finite at step " + std::to_string(step));
    adamw_step(ckpt.params, grads, *ckpt.optim, train);
    ckpt.step = step;
    loss_since_report += loss;
    ++steps_since_report;

    MetricsRow row{step, loss, std::nullopt};
    const bool report = step == train.total_steps || (train.checkpoint_every && step % train.checkpoint_every == 0);
    if (report) {
      EvalReport ev = evaluate(ckpt.params, eval_set);
      ev.train_loss = loss_since_report / static_cast<double>(steps_since_report);
      loss_since_report = 0.0;
      steps_since_report = 0;
      row.eval = ev;
      if (options.checkpoint_path) save_checkpoint(ckpt, *options.checkpoint_path);
    }
    emit(std::move(row));
  }

  result.final_eval = evaluate(ckpt.params, eval_set);
  result.final_train_perplexity = evaluate(ckpt.params, train_set.empty() ? eval_set : train_set).perplexity;
  if (train.total_steps == 0 && options.checkpoint_path) save_checkpoint(ckpt, *options.checkpoint_path);
  return result;
}

}  // namespace hllm::train
