#include <cmath>

#include "hllm/kernels.hpp"

namespace hllm::kernels {
namespace {

void gemm(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    float* ci = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0f;
    for (std::size_t p = 0; p < k; ++p) {
      const float aip = a[i * k + p];
      const float* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] = ci[j] + aip * bp[j];
    }
  }
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void add(const float* x, const float* y, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(const float* x, const float* y, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void adamw(float* w, const float* g, float* m, float* v, std::size_t n, const AdamWCoeffs& c) {
  for (std::size_t i = 0; i < n; ++i) {
    const float mi = c.beta1 * m[i] + c.one_minus_beta1 * g[i];
    const float vi = c.beta2 * v[i] + c.one_minus_beta2 * (g[i] * g[i]);
    m[i] = mi;
    v[i] = vi;
    const float m_hat = mi / c.bias_correction1;
    const float v_hat = vi / c.bias_correction2;
    const float update = m_hat / (std::sqrt(v_hat) + c.eps);
    w[i] = (w[i] - c.lr * update) - c.lr_times_decay * w[i];
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", gemm, axpy, add, mul, adamw};
  return table;
}

}  // namespace hllm::kernels
