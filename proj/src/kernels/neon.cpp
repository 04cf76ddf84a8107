// AArch64 only; Advanced SIMD is mandatory there so no runtime check is needed.
#include <arm_neon.h>

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
    for (; j + 16 <= n; j += 16) {
      float32x4_t c0, c1, c2, c3;
      if (accumulate) {
        c0 = vld1q_f32(ci + j);
        c1 = vld1q_f32(ci + j + 4);
        c2 = vld1q_f32(ci + j + 8);
        c3 = vld1q_f32(ci + j + 12);
      } else {
        c0 = c1 = c2 = c3 = vdupq_n_f32(0.0f);
      }
      for (std::size_t p = 0; p < k; ++p) {
        const float32x4_t av = vdupq_n_f32(ai[p]);
        const float* bp = b + p * n + j;
        // vmulq + vaddq rather than vfmaq: keeps the scalar rounding sequence.
        c0 = vaddq_f32(c0, vmulq_f32(av, vld1q_f32(bp)));
        c1 = vaddq_f32(c1, vmulq_f32(av, vld1q_f32(bp + 4)));
        c2 = vaddq_f32(c2, vmulq_f32(av, vld1q_f32(bp + 8)));
        c3 = vaddq_f32(c3, vmulq_f32(av, vld1q_f32(bp + 12)));
      }
      vst1q_f32(ci + j, c0);
      vst1q_f32(ci + j + 4, c1);
      vst1q_f32(ci + j + 8, c2);
      vst1q_f32(ci + j + 12, c3);
    }
    for (; j < n; ++j) {
      float acc = accumulate ? ci[j] : 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc = acc + ai[p] * b[p * n + j];
      ci[j] = acc;
    }
  }
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  const float32x4_t av = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vmulq_f32(av, vld1q_f32(x + i))));
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void add(const float* x, const float* y, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vaddq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(const float* x, const float* y, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void adamw(float* w, const float* g, float* m, float* v, std::size_t n, const AdamWCoeffs& c) {
  const float32x4_t b1 = vdupq_n_f32(c.beta1), b2 = vdupq_n_f32(c.beta2);
  const float32x4_t omb1 = vdupq_n_f32(c.one_minus_beta1), omb2 = vdupq_n_f32(c.one_minus_beta2);
  const float32x4_t bc1 = vdupq_n_f32(c.bias_correction1), bc2 = vdupq_n_f32(c.bias_correction2);
  const float32x4_t lr = vdupq_n_f32(c.lr), eps = vdupq_n_f32(c.eps);
  const float32x4_t lrwd = vdupq_n_f32(c.lr_times_decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t gi = vld1q_f32(g + i);
    const float32x4_t mi = vaddq_f32(vmulq_f32(b1, vld1q_f32(m + i)), vmulq_f32(omb1, gi));
    const float32x4_t vi = vaddq_f32(vmulq_f32(b2, vld1q_f32(v + i)), vmulq_f32(omb2, vmulq_f32(gi, gi)));
    vst1q_f32(m + i, mi);
    vst1q_f32(v + i, vi);
    const float32x4_t m_hat = vdivq_f32(mi, bc1);
    const float32x4_t v_hat = vdivq_f32(vi, bc2);
    const float32x4_t update = vdivq_f32(m_hat, vaddq_f32(vsqrtq_f32(v_hat), eps));
    const float32x4_t wi = vld1q_f32(w + i);
    vst1q_f32(w + i, vsubq_f32(vsubq_f32(wi, vmulq_f32(lr, update)), vmulq_f32(lrwd, wi)));
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

const KernelTable& neon_kernels() {
  static const KernelTable table{"neon", gemm, axpy, add, mul, adamw};
  return table;
}

}  // namespace hllm::kernels
