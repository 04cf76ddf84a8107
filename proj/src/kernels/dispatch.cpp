#include <atomic>
#include <cstdlib>

#include "hllm/kernels.hpp"

namespace hllm::kernels {

#if defined(HLLM_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif
#if defined(HLLM_HAVE_NEON)
const KernelTable& neon_kernels();
#endif

const KernelTable* avx2_table() {
#if defined(HLLM_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &avx2_kernels() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() {
#if defined(HLLM_HAVE_NEON)
  return &neon_kernels();
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available() {
  std::vector<const KernelTable*> out{&scalar_table()};
  if (auto* t = avx2_table()) out.push_back(t);
  if (auto* t = neon_table()) out.push_back(t);
  return out;
}

namespace {

const KernelTable* by_name(std::string_view name) {
  for (const KernelTable* t : available())
    if (t->name == name) return t;
  return nullptr;
}

const KernelTable* initial() {
  if (const char* env = std::getenv("HLLM_KERNELS")) {
    if (const KernelTable* t = by_name(env)) return t;
  }
  return available().back();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
  const KernelTable* t = by_name(name);
  if (!t) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

}  // namespace hllm::kernels
