#include "metbayes/kernels.hpp"

namespace metbayes::kernels::detail {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_copy_scalar(double a, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void gather_axpy_scalar(double a, const double* v, const std::int32_t* idx, double* y,
                        std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * v[idx[i]];
}

}  // namespace

const KernelTable scalar_table{
    dot_scalar, sum_squares_scalar, axpy_scalar, scale_copy_scalar, gather_axpy_scalar,
};

}  // namespace metbayes::kernels::detail
