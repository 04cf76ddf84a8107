#include "hllm/model.hpp"

#include <cmath>
#include <numbers>

#include "hllm/error.hpp"

namespace hllm::model {

using tensor::Shape;
using tensor::Tape;
using tensor::Var;

void ModelConfig::validate() const {
  if (vocab_size < 1) throw UsageError("vocab_size must be >= 1");
  if (embed_dim < 1 || heads < 1) throw UsageError("embed_dim and heads must be >= 1");
  if (embed_dim % heads != 0)
    throw UsageError("embed_dim " + std::to_string(embed_dim) + " is not divisible by heads " +
                     std::to_string(heads));
  if (context_window < 1) throw UsageError("context_window must be >= 1");
  if (!tie_output) throw UsageError("only the tied output head is supported");
}

ModelConfig ModelConfig::small() { return {50008, 768, 12, 12, 1024, true}; }
ModelConfig ModelConfig::medium() { return {50008, 1024, 24, 16, 1024, true}; }
ModelConfig ModelConfig::tiny() { return {256, 8, 1, 2, 16, true}; }

ModelConfig ModelConfig::preset(std::string_view name) {
  if (name == "small") return small();
  if (name == "medium") return medium();
  if (name == "tiny") return tiny();
  throw UsageError("unknown preset '" + std::string(name) + "' (small|medium|tiny)");
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  return {{"vocab_size", std::to_string(vocab_size)},
          {"embed_dim", std::to_string(embed_dim)},
          {"layers", std::to_string(layers)},
          {"heads", std::to_string(heads)},
          {"context_window", std::to_string(context_window)},
          {"tie_output", tie_output ? "true" : "false"}};
}

namespace {

std::size_t parse_count(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != value.size() || value[0] == '-')
    throw UsageError("config key '" + key + "': expected a non-negative integer, got '" + value + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv) {
  ModelConfig c = tiny();
  if (auto it = kv.find("preset"); it != kv.end()) c = preset(it->second);
  for (const auto& [key, value] : kv) {
    if (key == "preset") continue;
    if (key == "vocab_size") c.vocab_size = parse_count(key, value);
    else if (key == "embed_dim") c.embed_dim = parse_count(key, value);
    else if (key == "layers") c.layers = parse_count(key, value);
    else if (key == "heads") c.heads = parse_count(key, value);
    else if (key == "context_window") c.context_window = parse_count(key, value);
    else if (key == "tie_output") {
      if (value != "true" && value != "false")
        throw UsageError("config key 'tie_output': expected true|false");
      c.tie_output = value == "true";
    }
  }
  c.validate();
  return c;
}

std::uint64_t count_params(const ModelConfig& c) {
  const std::uint64_t V = c.vocab_size, d = c.embed_dim, L = c.layers, n = c.context_window;
  return V * d + n * d + L * (12 * d * d + 13 * d) + 2 * d;
}

template <typename T>
BasicParameters<T>::BasicParameters(const ModelConfig& config) : config_(config) {
  config.validate();
  const std::size_t V = config.vocab_size, d = config.embed_dim, n = config.context_window;
  add("wte", BasicTensor<T>({V, d}));
  add("wpe", BasicTensor<T>({n, d}));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = "h." + std::to_string(l) + ".";
    add(p + "ln_1.g", BasicTensor<T>({d}, T{1}));
    add(p + "ln_1.b", BasicTensor<T>({d}));
    add(p + "attn.qkv.w", BasicTensor<T>({d, 3 * d}));
    add(p + "attn.qkv.b", BasicTensor<T>({3 * d}));
    add(p + "attn.proj.w", BasicTensor<T>({d, d}));
    add(p + "attn.proj.b", BasicTensor<T>({d}));
    add(p + "ln_2.g", BasicTensor<T>({d}, T{1}));
    add(p + "ln_2.b", BasicTensor<T>({d}));
    add(p + "mlp.fc.w", BasicTensor<T>({d, 4 * d}));
    add(p + "mlp.fc.b", BasicTensor<T>({4 * d}));
    add(p + "mlp.proj.w", BasicTensor<T>({4 * d, d}));
    add(p + "mlp.proj.b", BasicTensor<T>({d}));
  }
  add("ln_f.g", BasicTensor<T>({d}, T{1}));
  add("ln_f.b", BasicTensor<T>({d}));
}

template <typename T>
std::optional<std::size_t> BasicParameters<T>::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

template <typename T>
BasicTensor<T>& BasicParameters<T>::at(std::string_view name) {
  if (auto i = find(name)) return tensors_[*i];
  throw UsageError("no parameter named '" + std::string(name) + "'");
}

template <typename T>
const BasicTensor<T>& BasicParameters<T>::at(std::string_view name) const {
  if (auto i = find(name)) return tensors_[*i];
  throw UsageError("no parameter named '" + std::string(name) + "'");
}

template <typename T>
void BasicParameters<T>::add(std::string name, BasicTensor<T> value) {
  if (find(name)) throw UsageError("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

template <typename T>
std::uint64_t BasicParameters<T>::element_count() const {
  std::uint64_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template class BasicParameters<float>;
template class BasicParameters<double>;
template class BasicParameters<long double>;

double NormalSampler::next(double mean, double stddev) {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return mean + stddev * z;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform01(engine_);
  const double u2 = uniform01(engine_);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return mean + stddev * r * std::cos(theta);
}

void NormalSampler::fill(std::span<float> out, double mean, double stddev) {
  for (float& x : out) x = static_cast<float>(next(mean, stddev));
}

Parameters init_params(const ModelConfig& config, std::uint64_t seed) {
  Parameters p(config);
  NormalSampler rng(seed);
  constexpr double kStd = 0.02;
  const double residual_std = kStd / std::sqrt(2.0 * static_cast<double>(config.layers));
  rng.fill(p.tensor(p.token_embedding()).data(), 0.0, kStd);
  rng.fill(p.tensor(p.position_embedding()).data(), 0.0, kStd);
  for (std::size_t l = 0; l < config.layers; ++l) {
    rng.fill(p.tensor(p.layer_slot(l, Parameters::kQkvWeight)).data(), 0.0, kStd);
    rng.fill(p.tensor(p.layer_slot(l, Parameters::kProjWeight)).data(), 0.0, residual_std);
    rng.fill(p.tensor(p.layer_slot(l, Parameters::kFcWeight)).data(), 0.0, kStd);
    rng.fill(p.tensor(p.layer_slot(l, Parameters::kFcProjWeight)).data(), 0.0, residual_std);
  }
  return p;
}

template <typename T>
std::vector<Var<T>> bind(Tape<T>& tape, const BasicParameters<T>& params, bool requires_grad) {
  std::vector<Var<T>> vars;
  vars.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    vars.push_back(tape.leaf(params.tensor(i), requires_grad));
  return vars;
}

template <typename T>
Var<T> block(const ModelConfig& config, std::span<const Var<T>> lp, Var<T> x,
             std::vector<BasicTensor<T>>* probe_probs) {
  using P = BasicParameters<T>;
  const std::size_t d = config.embed_dim, H = config.heads, dh = config.head_dim();

  // Attention sub-layer.
  const Var<T> h1 = layer_norm(x, lp[P::kLn1Gain], lp[P::kLn1Bias]);
  const Var<T> qkv = add(matmul(h1, lp[P::kQkvWeight]), lp[P::kQkvBias]);
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dh));
  std::vector<Var<T>> heads;
  heads.reserve(H);
  for (std::size_t h = 0; h < H; ++h) {
    const Var<T> q = slice_cols(qkv, h * dh, dh);
    const Var<T> k = slice_cols(qkv, d + h * dh, dh);
    const Var<T> v = slice_cols(qkv, 2 * d + h * dh, dh);
    const Var<T> probs = causal_softmax(scale(matmul(q, transpose(k)), inv_sqrt));
    if (probe_probs) probe_probs->push_back(probs.tensor());
    heads.push_back(matmul(probs, v));
  }
  const Var<T> attn = add(matmul(concat_cols<T>(heads), lp[P::kProjWeight]), lp[P::kProjBias]);
  x = add(x, attn);

  // MLP sub-layer.
  const Var<T> h2 = layer_norm(x, lp[P::kLn2Gain], lp[P::kLn2Bias]);
  const Var<T> up = gelu(add(matmul(h2, lp[P::kFcWeight]), lp[P::kFcBias]));
  const Var<T> down = add(matmul(up, lp[P::kFcProjWeight]), lp[P::kFcProjBias]);
  return add(x, down);
}

template <typename T>
Var<T> hidden_states(const ModelConfig& config, std::span<const Var<T>> params,
                     std::span<const TokenId> ids, AttentionProbe<T>* probe) {
  using P = BasicParameters<T>;
  if (ids.empty()) throw UsageError("forward: empty token sequence");
  if (ids.size() > config.context_window)
    throw UsageError("forward: " + std::to_string(ids.size()) + " tokens exceed the context window of " +
                     std::to_string(config.context_window));
  for (TokenId id : ids)
    if (id >= config.vocab_size)
      throw UsageError("forward: token id " + std::to_string(id) + " >= vocab size " +
                       std::to_string(config.vocab_size));

  std::vector<std::uint32_t> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<std::uint32_t>(i);
  Var<T> x = add(embedding_lookup(params[P::token_embedding()], ids),
                 embedding_lookup(params[P::position_embedding()], std::span<const std::uint32_t>(positions)));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const auto layer = params.subspan(2 + l * P::kSlotsPerLayer, P::kSlotsPerLayer);
    x = block(config, layer, x, probe ? &probe->probs : nullptr);
  }
  const std::size_t fg = 2 + config.layers * P::kSlotsPerLayer;
  return layer_norm(x, params[fg], params[fg + 1]);
}

template <typename T>
Var<T> lm_head(std::span<const Var<T>> params, Var<T> hidden) {
  return matmul(hidden, transpose(params[BasicParameters<T>::token_embedding()]));
}

Tensor forward(const Parameters& params, std::span<const TokenId> ids) {
  Tape<float> tape;
  const auto vars = bind(tape, params, false);
  const Var<float> hidden = hidden_states<float>(params.config(), vars, ids);
  return lm_head<float>(vars, hidden).tensor();
}

#define HLLM_INSTANTIATE_MODEL(T)                                                               \
  template std::vector<Var<T>> bind(Tape<T>&, const BasicParameters<T>&, bool);                 \
  template Var<T> block(const ModelConfig&, std::span<const Var<T>>, Var<T>,                    \
                        std::vector<BasicTensor<T>>*);                                          \
  template Var<T> hidden_states(const ModelConfig&, std::span<const Var<T>>,                    \
                                std::span<const TokenId>, AttentionProbe<T>*);                  \
  template Var<T> lm_head(std::span<const Var<T>>, Var<T>);

HLLM_INSTANTIATE_MODEL(float)
HLLM_INSTANTIATE_MODEL(double)
HLLM_INSTANTIATE_MODEL(long double)

}  // namespace hllm::model
