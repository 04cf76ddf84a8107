#include <algorithm>

#include "hllm/autograd.hpp"
#include "hllm/error.hpp"

namespace hllm::tensor {

template <typename T>
const Shape& Var<T>::shape() const {
  return tape_->shape(*this);
}

template <typename T>
std::span<const T> Var<T>::value() const {
  return tape_->value(*this);
}

template <typename T>
BasicTensor<T> Var<T>::tensor() const {
  auto v = value();
  return BasicTensor<T>(shape(), std::vector<T>(v.begin(), v.end()));
}

template <typename T>
Var<T> Tape<T>::push(Node node) {
  if (backward_done_) throw UsageError("tape already differentiated; call reset() first");
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
Var<T> Tape<T>::leaf(const BasicTensor<T>& value, bool requires_grad) {
  if (!all_finite<T>(value.data()))
    throw NumericError("non-finite value in leaf tensor " + shape_str(value.shape()));
  Node n;
  n.op = "leaf";
  n.shape = value.shape();
  n.external = value.data().data();
  n.count = value.size();
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::constant(BasicTensor<T> value) {
  if (!all_finite<T>(value.data()))
    throw NumericError("non-finite value in constant tensor " + shape_str(value.shape()));
  Node n;
  n.op = "constant";
  n.shape = value.shape();
  n.count = value.size();
  n.owned = std::move(value.storage());
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::record(const char* op, Shape shape, std::vector<T> value,
                       std::vector<Var<T>> inputs, BackwardFn backward) {
  if (value.size() != element_count(shape))
    throw UsageError(std::string(op) + ": value size does not match shape " + shape_str(shape));
  if (!all_finite<T>(value)) throw NumericError(std::string(op) + " produced a non-finite value");
  Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.count = value.size();
  n.owned = std::move(value);
  for (const Var<T>& in : inputs) {
    if (in.tape() != this) throw UsageError(std::string(op) + ": input belongs to another tape");
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

template <typename T>
std::span<const T> Tape<T>::value(Var<T> v) const {
  const Node& n = nodes_[v.id()];
  if (n.external) return {n.external, n.count};
  return n.owned;
}

template <typename T>
std::span<T> Tape<T>::grad_buffer(Var<T> v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad.assign(n.count, T{0});
  return n.grad;
}

template <typename T>
void Tape<T>::accumulate_grad(Var<T> v, std::span<const T> g) {
  if (!nodes_[v.id()].requires_grad) return;
  auto buf = grad_buffer(v);
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (backward_done_) throw UsageError("backward called twice without reset");
  const Node& root = nodes_.at(loss.id());
  if (root.count != 1)
    throw UsageError("backward needs a scalar loss, got shape " + shape_str(root.shape));
  backward_done_ = true;
  if (!root.requires_grad) return;
  grad_buffer(loss)[0] = T{1};
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // Closures only touch their inputs' gradients, which live in other nodes.
    n.backward(*this, std::span<const T>(n.grad));
  }
}

template <typename T>
BasicTensor<T> Tape<T>::grad(Var<T> v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return BasicTensor<T>(n.shape);
  return BasicTensor<T>(n.shape, n.grad);
}

template <typename T>
std::span<const T> Tape<T>::grad_view(Var<T> v) const {
  return nodes_[v.id()].grad;
}

template <typename T>
void Tape<T>::reset() {
  nodes_.clear();
  backward_done_ = false;
}

template class Var<float>;
template class Var<double>;
template class Tape<float>;
template class Tape<double>;
template class Var<long double>;
template class Tape<long double>;

}  // namespace hllm::tensor
