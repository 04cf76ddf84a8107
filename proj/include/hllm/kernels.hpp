#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

// Data-parallel float32 inner loops. Every variant vectorizes only across
// independent outputs and keeps the per-element operation order of the
// scalar reference, so all variants produce bit-identical results.
namespace hllm::kernels {

struct AdamWCoeffs {
  float lr;
  float beta1;
  float beta2;
  float one_minus_beta1;
  float one_minus_beta2;
  float bias_correction1;  // 1 - beta1^t
  float bias_correction2;  // 1 - beta2^t
  float eps;
  float lr_times_decay;    // lr * weight_decay, 0 for excluded tensors
};

struct KernelTable {
  std::string_view name;

  // c[m,n] = a[m,k] * b[k,n] (or c += when accumulate). Each output element
  // is reduced over k in increasing order.
  void (*gemm)(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  // out = x + y
  void (*add)(const float* x, const float* y, float* out, std::size_t n);
  // out = x * y
  void (*mul)(const float* x, const float* y, float* out, std::size_t n);
  // Decoupled-weight-decay Adam update, in place.
  void (*adamw)(float* w, const float* g, float* m, float* v, std::size_t n,
                const AdamWCoeffs& c);
};

const KernelTable& scalar_table();

// Null when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// Best available variant, unless overridden with HLLM_KERNELS=scalar|avx2|neon
// or select().
const KernelTable& active();

// Returns false if the named variant is unavailable.
bool select(std::string_view name);

std::vector<const KernelTable*> available();

}  // namespace hllm::kernels
