#pragma once

// Dense inner-loop kernels used by the Gibbs sweeps.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2+FMA (x86-64) or NEON (aarch64) variant. The variant is
// chosen once at first use from the CPU's capabilities and can be overridden
// with the METBAYES_ISA environment variable ("scalar", "avx2", "neon") or
// force_isa() in tests.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace metbayes::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// ISA used by the dispatching entry points below.
Isa active_isa();

/// True when `isa` can execute on this machine.
bool isa_available(Isa isa);

/// Overrides the dispatch target. Throws if `isa` is unavailable.
void force_isa(Isa isa);

struct KernelTable {
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out = a * x
  void (*scale_copy)(double a, const double* x, double* out, std::size_t n);
  // y[i] += a * v[idx[i]]
  void (*gather_axpy)(double a, const double* v, const std::int32_t* idx, double* y,
                      std::size_t n);
};

const KernelTable& table(Isa isa);

double dot(std::span<const double> x, std::span<const double> y);
double sum_squares(std::span<const double> x);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale_copy(double a, std::span<const double> x, std::span<double> out);
void gather_axpy(double a, std::span<const double> v, std::span<const std::int32_t> idx,
                 std::span<double> y);

/// acc[idx[i]] += w[i]. No vector variant: AVX2 has no scatter.
void scatter_add(std::span<const double> w, std::span<const std::int32_t> idx,
                 std::span<double> acc);

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace metbayes::kernels
