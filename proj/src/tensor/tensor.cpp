#include "hllm/tensor.hpp"

#include <cmath>

#include "hllm/error.hpp"

namespace hllm::tensor {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_))
    throw UsageError("tensor shape " + shape_str(shape_) + " needs " +
                     std::to_string(element_count(shape_)) + " elements, got " +
                     std::to_string(data_.size()));
}

template <typename T>
bool all_finite(std::span<const T> xs) {
  for (T x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);
template class BasicTensor<long double>;
template bool all_finite<long double>(std::span<const long double>);

}  // namespace hllm::tensor
