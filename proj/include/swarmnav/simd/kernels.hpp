#pragma once

// Data-parallel inner loops used by the swarm physics, the MLP and the
// optimizer. Every kernel has a scalar reference implementation and an AVX2
// variant; the active table is chosen once at startup from the CPU features
// (override with SWARMNAV_SIMD=scalar|avx2).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace swarmnav::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;

// Adam hyperparameters with the bias corrections folded in by the caller.
struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  void (*scale)(double alpha, double* x, std::size_t n);
  // y[k] = tanh(y[k]) is not vectorised; callers use std::tanh.
  void (*tanh_backward)(const double* act, double* grad, std::size_t n);

  // out[i] = min(cap, sum_{j != i, active j} coupling / r_ij^2) for every
  // active i; coincident active pairs saturate to cap. Inactive entries
  // get 0.
  void (*hydro_weights)(const double* xs, const double* ys, const std::uint8_t* absorbed,
                        double* out, std::size_t n, double coupling, double cap);

  void (*adam_update)(double* params, const double* grads, double* m, double* v,
                      std::size_t n, const AdamCoeffs& c);
};

const KernelTable& scalar_kernels() noexcept;
// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels() noexcept;

// Table selected for this process.
const KernelTable& active() noexcept;

// Test hook: force a particular table. Returns false if unavailable.
bool select(Isa isa) noexcept;

// Span conveniences over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double sum_squares(std::span<const double> x) {
  return active().sum_squares(x.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

}  // namespace swarmnav::simd
