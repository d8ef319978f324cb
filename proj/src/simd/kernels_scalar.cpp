#include "swarmnav/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace swarmnav::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void tanh_backward_scalar(const double* act, double* grad, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) grad[i] *= 1.0 - act[i] * act[i];
}

void hydro_weights_scalar(const double* xs, const double* ys, const std::uint8_t* absorbed,
                          double* out, std::size_t n, double coupling, double cap) {
  for (std::size_t i = 0; i < n; ++i) {
    if (absorbed[i]) {
      out[i] = 0.0;
      continue;
    }
    double sum = 0.0;
    bool coincident = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || absorbed[j]) continue;
      const double dx = xs[j] - xs[i];
      const double dy = ys[j] - ys[i];
      const double r2 = dx * dx + dy * dy;
      if (r2 == 0.0) {
        coincident = true;
        continue;
      }
      sum += coupling / r2;
    }
    out[i] = coincident ? cap : std::min(cap, sum);
  }
}

void adam_update_scalar(double* params, const double* grads, double* m, double* v,
                        std::size_t n, const AdamCoeffs& c) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grads[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * (grads[i] * grads[i]);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

constexpr KernelTable kScalar{
    Isa::Scalar,       dot_scalar,           axpy_scalar,         sum_squares_scalar,
    scale_scalar,      tanh_backward_scalar, hydro_weights_scalar, adam_update_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

}  // namespace swarmnav::simd
