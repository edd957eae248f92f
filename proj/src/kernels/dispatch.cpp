#include <atomic>
#include <cstdlib>
#include <string>

#include "metbayes/errors.hpp"
#include "metbayes/kernels.hpp"

namespace metbayes::kernels {
namespace {

Isa detect() {
  if (const char* env = std::getenv("METBAYES_ISA")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && isa_available(Isa::avx2)) return Isa::avx2;
    if (v == "neon" && isa_available(Isa::neon)) return Isa::neon;
  }
  if (isa_available(Isa::avx2)) return Isa::avx2;
  if (isa_available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> t{&table(detect())};
  return t;
}

std::atomic<Isa>& current_isa() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::avx2: return detail::avx2_table;
#endif
#if defined(__aarch64__)
    case Isa::neon: return detail::neon_table;
#endif
    default: return detail::scalar_table;
  }
}

Isa active_isa() { return current_isa().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw Error("ISA not available on this machine: " + std::string(isa_name(isa)));
  }
  current().store(&table(isa), std::memory_order_relaxed);
  current_isa().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

double sum_squares(std::span<const double> x) { return active().sum_squares(x.data(), x.size()); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

void scale_copy(double a, std::span<const double> x, std::span<double> out) {
  active().scale_copy(a, x.data(), out.data(), x.size());
}

void gather_axpy(double a, std::span<const double> v, std::span<const std::int32_t> idx,
                 std::span<double> y) {
  active().gather_axpy(a, v.data(), idx.data(), y.data(), idx.size());
}

void scatter_add(std::span<const double> w, std::span<const std::int32_t> idx,
                 std::span<double> acc) {
  for (std::size_t i = 0; i < idx.size(); ++i) acc[idx[i]] += w[i];
}

}  // namespace metbayes::kernels
