#if defined(__aarch64__)
#include <arm_neon.h>

#include "metbayes/kernels.hpp"

namespace metbayes::kernels::detail {
namespace {

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_squares_neon(const double* x, std::size_t n) { return dot_neon(x, x, n); }

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_copy_neon(double a, const double* x, double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (; i < n; ++i) out[i] = a * x[i];
}

// NEON has no gather; lanes are filled one at a time.
void gather_axpy_neon(double a, const double* v, const std::int32_t* idx, double* y,
                      std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t g = vdupq_n_f64(v[idx[i]]);
    g = vsetq_lane_f64(v[idx[i + 1]], g, 1);
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, g));
  }
  for (; i < n; ++i) y[i] += a * v[idx[i]];
}

}  // namespace

const KernelTable neon_table{
    dot_neon, sum_squares_neon, axpy_neon, scale_copy_neon, gather_axpy_neon,
};

}  // namespace metbayes::kernels::detail
#endif
