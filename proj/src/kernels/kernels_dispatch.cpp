#include <atomic>
#include <cstdlib>
#include <string_view>

#include "scoremix/kernels.hpp"

namespace smx::kernels {

#if defined(SMX_BUILD_AVX2)
const KernelTable* avx2_table_impl();
#endif

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_table() {
#if defined(SMX_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* initial_table() {
  const char* env = std::getenv("SMX_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

bool set_active(Isa isa) {
  const KernelTable* t = isa == Isa::scalar ? &scalar_table() : avx2_table();
  if (t == nullptr) return false;
  active_slot().store(t, std::memory_order_release);
  return true;
}

}  // namespace smx::kernels
