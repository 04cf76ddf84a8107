#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hllm/tensor.hpp"

// Tape-based reverse-mode differentiation over BasicTensor<T>.
//
// A Tape records every primitive in execution order; backward() walks the
// record in exact reverse. Leaves may reference external storage (model
// parameters) without copying; that storage must outlive the tape.
// Every primitive rejects non-finite inputs and outputs with NumericError.
namespace hllm::tensor {

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;

  const Shape& shape() const;
  std::span<const T> value() const;
  BasicTensor<T> tensor() const;
  std::uint32_t id() const { return id_; }
  Tape<T>* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  // Backward closure of a primitive: receives the output gradient and
  // accumulates into the inputs with accumulate_grad().
  using BackwardFn = std::function<void(Tape&, std::span<const T> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // References `value` without copying.
  Var<T> leaf(const BasicTensor<T>& value, bool requires_grad = true);
  // Takes ownership; never receives a gradient.
  Var<T> constant(BasicTensor<T> value);

  // Registers a primitive. `backward` runs only if some input requires a gradient.
  Var<T> record(const char* op, Shape shape, std::vector<T> value, std::vector<Var<T>> inputs,
                BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. The loss must hold exactly one
  // element; a second call without reset() throws UsageError.
  void backward(Var<T> loss);

  // Gradient of any node; zeros when nothing flowed into it.
  BasicTensor<T> grad(Var<T> v) const;
  // Empty span when nothing flowed into the node.
  std::span<const T> grad_view(Var<T> v) const;

  void accumulate_grad(Var<T> v, std::span<const T> g);
  // Mutable gradient buffer of `v`, zero-initialized on first use.
  std::span<T> grad_buffer(Var<T> v);

  bool requires_grad(Var<T> v) const { return nodes_[v.id()].requires_grad; }
  const Shape& shape(Var<T> v) const { return nodes_[v.id()].shape; }
  std::span<const T> value(Var<T> v) const;

  std::size_t size() const { return nodes_.size(); }
  void reset();

 private:
  struct Node {
    const char* op;
    Shape shape;
    std::vector<T> owned;
    const T* external = nullptr;
    std::size_t count = 0;
    bool requires_grad = false;
    std::vector<T> grad;
    BackwardFn backward;
  };

  Var<T> push(Node node);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---- primitives -----------------------------------------------------------

// [m,k] x [k,n] -> [m,n]
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
// Same shapes, or b's shape equals a's last extent (broadcast over rows).
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);
// 2-D transpose.
template <typename T> Var<T> transpose(Var<T> a);
template <typename T> Var<T> reshape(Var<T> a, Shape shape);
// Sum of all elements, shape [1].
template <typename T> Var<T> sum(Var<T> a);

// Row gather: table [V,d], ids -> [t,d]. Throws UsageError for ids >= V.
template <typename T> Var<T> embedding_lookup(Var<T> table, std::span<const std::uint32_t> ids);
// Column block [:, start, start+width).
template <typename T> Var<T> slice_cols(Var<T> a, std::size_t start, std::size_t width);
template <typename T> Var<T> concat_cols(std::span<const Var<T>> parts);
template <typename T> Var<T> concat_rows(std::span<const Var<T>> parts);

// Max-subtracted softmax over the last extent.
template <typename T> Var<T> softmax_rows(Var<T> x);
// Square [t,t] scores; row i is normalized over columns 0..i and zero beyond.
template <typename T> Var<T> causal_softmax(Var<T> scores);
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5));
// Tanh approximation.
template <typename T> Var<T> gelu(Var<T> x);

// Mean over non-ignored rows of -log softmax(logits)[target], shape [1].
// Throws UsageError when a target is out of range or every row is ignored.
template <typename T>
Var<T> cross_entropy_logits(Var<T> logits, std::span<const std::uint32_t> targets,
                            std::optional<std::uint32_t> ignore_id = std::nullopt);

// ---- gradient checking ----------------------------------------------------

// Scalar-valued function of taped inputs.
template <typename T>
using TapedFn = std::function<Var<T>(Tape<T>&, std::span<const Var<T>>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t input = 0;    // where the maximum occurred
  std::size_t element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Five-point central differences per input element against the taped gradient;
// relative error |a - n| / max(1e-8, |a| + |n|).
template <typename T>
GradCheckResult grad_check(const TapedFn<T>& f, std::vector<BasicTensor<T>> inputs, double eps);

// Same, with the numeric side evaluated by `shadow` in extended precision.
template <typename T>
GradCheckResult grad_check(const TapedFn<T>& f, const TapedFn<long double>& shadow,
                           std::vector<BasicTensor<T>> inputs, double eps);

}  // namespace hllm::tensor
