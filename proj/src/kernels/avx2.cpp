// Compiled with -mavx2 only; callers reach it through avx2_table() after a
// CPU feature check.
#include <immintrin.h>

#include <cmath>

#include "hllm/kernels.hpp"

namespace hllm::kernels {
namespace {

void gemm(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* ai = a + i * k;
    float* ci = c + i * n;
    std::size_t j = 0;
    // 32 output columns held in registers across the whole k loop.
    for (; j + 32 <= n; j += 32) {
      __m256 c0, c1, c2, c3;
      if (accumulate) {
        c0 = _mm256_loadu_ps(ci + j);
        c1 = _mm256_loadu_ps(ci + j + 8);
        c2 = _mm256_loadu_ps(ci + j + 16);
        c3 = _mm256_loadu_ps(ci + j + 24);
      } else {
        c0 = c1 = c2 = c3 = _mm256_setzero_ps();
      }
      for (std::size_t p = 0; p < k; ++p) {
        const __m256 av = _mm256_set1_ps(ai[p]);
        const float* bp = b + p * n + j;
        c0 = _mm256_add_ps(c0, _mm256_mul_ps(av, _mm256_loadu_ps(bp)));
        c1 = _mm256_add_ps(c1, _mm256_mul_ps(av, _mm256_loadu_ps(bp + 8)));
        c2 = _mm256_add_ps(c2, _mm256_mul_ps(av, _mm256_loadu_ps(bp + 16)));
        c3 = _mm256_add_ps(c3, _mm256_mul_ps(av, _mm256_loadu_ps(bp + 24)));
      }
      _mm256_storeu_ps(ci + j, c0);
      _mm256_storeu_ps(ci + j + 8, c1);
      _mm256_storeu_ps(ci + j + 16, c2);
      _mm256_storeu_ps(ci + j + 24, c3);
    }
    for (; j + 8 <= n; j += 8) {
      __m256 c0 = accumulate ? _mm256_loadu_ps(ci + j) : _mm256_setzero_ps();
      for (std::size_t p = 0; p < k; ++p)
        c0 = _mm256_add_ps(c0, _mm256_mul_ps(_mm256_set1_ps(ai[p]), _mm256_loadu_ps(b + p * n + j)));
      _mm256_storeu_ps(ci + j, c0);
    }
    for (; j < n; ++j) {
      float acc = accumulate ? ci[j] : 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc = acc + ai[p] * b[p * n + j];
      ci[j] = acc;
    }
  }
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i),
                                          _mm256_mul_ps(av, _mm256_loadu_ps(x + i))));
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void add(const float* x, const float* y, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(const float* x, const float* y, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void adamw(float* w, const float* g, float* m, float* v, std::size_t n, const AdamWCoeffs& c) {
  const __m256 b1 = _mm256_set1_ps(c.beta1), b2 = _mm256_set1_ps(c.beta2);
  const __m256 omb1 = _mm256_set1_ps(c.one_minus_beta1), omb2 = _mm256_set1_ps(c.one_minus_beta2);
  const __m256 bc1 = _mm256_set1_ps(c.bias_correction1), bc2 = _mm256_set1_ps(c.bias_correction2);
  const __m256 lr = _mm256_set1_ps(c.lr), eps = _mm256_set1_ps(c.eps);
  const __m256 lrwd = _mm256_set1_ps(c.lr_times_decay);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gi = _mm256_loadu_ps(g + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(omb1, gi));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(omb2, _mm256_mul_ps(gi, gi)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 m_hat = _mm256_div_ps(mi, bc1);
    const __m256 v_hat = _mm256_div_ps(vi, bc2);
    const __m256 update = _mm256_div_ps(m_hat, _mm256_add_ps(_mm256_sqrt_ps(v_hat), eps));
    const __m256 wi = _mm256_loadu_ps(w + i);
    _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_sub_ps(wi, _mm256_mul_ps(lr, update)),
                                          _mm256_mul_ps(lrwd, wi)));
  }
  for (; i < n; ++i) {
    const float mi = c.beta1 * m[i] + c.one_minus_beta1 * g[i];
    const float vi = c.beta2 * v[i] + c.one_minus_beta2 * (g[i] * g[i]);
    m[i] = mi;
    v[i] = vi;
    const float update = (mi / c.bias_correction1) / (std::sqrt(vi / c.bias_correction2) + c.eps);
    w[i] = (w[i] - c.lr * update) - c.lr_times_decay * w[i];
  }
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{"avx2", gemm, axpy, add, mul, adamw};
  return table;
}

}  // namespace hllm::kernels
