#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "pf/kernels.hpp"

namespace pf::kernels {

#if defined(PF_HAVE_AVX2)
const KernelTable& avx2_table_unchecked();
#endif

const KernelTable* avx2_table() {
#if defined(PF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out{&scalar_table()};
  if (const KernelTable* t = avx2_table()) out.push_back(t);
  return out;
}

namespace {

const KernelTable* lookup(std::string_view name) {
  for (const KernelTable* t : available_tables())
    if (name == t->name) return t;
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("PF_KERNELS"); env != nullptr && *env != '\0') {
    if (const KernelTable* t = lookup(env)) return t;
    throw std::invalid_argument("PF_KERNELS names an unavailable kernel variant: " +
                                std::string(env));
  }
  const auto all = available_tables();
  return all.back();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(std::string_view name) {
  const KernelTable* t = lookup(name);
  if (t == nullptr)
    throw std::invalid_argument("unknown or unavailable kernel variant: " + std::string(name));
  current().store(t, std::memory_order_release);
}

}  // namespace pf::kernels
