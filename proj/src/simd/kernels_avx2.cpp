// Compiled with -mavx2 -mfma. Only reached through the dispatch table after a
// runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "swarmnav/simd/kernels.hpp"

namespace swarmnav::simd {
namespace {

constexpr std::size_t kLanes = 4;

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + kLanes), _mm256_loadu_pd(b + i + kLanes), acc1);
  }
  for (; i + kLanes <= n; i += kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double sum_squares_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

void scale_avx2(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

void tanh_backward_avx2(const double* act, double* grad, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d a = _mm256_loadu_pd(act + i);
    const __m256d d = _mm256_sub_pd(one, _mm256_mul_pd(a, a));
    _mm256_storeu_pd(grad + i, _mm256_mul_pd(_mm256_loadu_pd(grad + i), d));
  }
  for (; i < n; ++i) grad[i] *= 1.0 - act[i] * act[i];
}

void hydro_weights_avx2(const double* xs, const double* ys, const std::uint8_t* absorbed,
                        double* out, std::size_t n, double coupling, double cap) {
  // Active flags widened to doubles so lanes can be masked with a compare.
  thread_local std::vector<double> active;
  active.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) active[j] = absorbed[j] ? 0.0 : 1.0;

  const __m256d zero = _mm256_setzero_pd();
  const __m256d vc = _mm256_set1_pd(coupling);
  const __m256d lane_idx = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    if (absorbed[i]) {
      out[i] = 0.0;
      continue;
    }
    const __m256d xi = _mm256_set1_pd(xs[i]);
    const __m256d yi = _mm256_set1_pd(ys[i]);
    const __m256d self = _mm256_set1_pd(static_cast<double>(i));
    __m256d sum = zero;
    __m256d hit = zero;
    std::size_t j = 0;
    for (; j + kLanes <= n; j += kLanes) {
      const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + j), xi);
      const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + j), yi);
      const __m256d r2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
      const __m256d jidx = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(j)), lane_idx);
      const __m256d other = _mm256_cmp_pd(jidx, self, _CMP_NEQ_OQ);
      const __m256d live = _mm256_and_pd(other, _mm256_cmp_pd(_mm256_loadu_pd(active.data() + j), zero, _CMP_NEQ_OQ));
      const __m256d is_zero = _mm256_cmp_pd(r2, zero, _CMP_EQ_OQ);
      hit = _mm256_or_pd(hit, _mm256_and_pd(live, is_zero));
      const __m256d use = _mm256_andnot_pd(is_zero, live);
      // Masked-out lanes divide by 1 to stay finite.
      const __m256d denom = _mm256_blendv_pd(_mm256_set1_pd(1.0), r2, use);
      sum = _mm256_add_pd(sum, _mm256_and_pd(use, _mm256_div_pd(vc, denom)));
    }
    double s = hsum(sum);
    bool coincident = _mm256_movemask_pd(hit) != 0;
    for (; j < n; ++j) {
      if (j == i || absorbed[j]) continue;
      const double dx = xs[j] - xs[i];
      const double dy = ys[j] - ys[i];
      const double r2 = dx * dx + dy * dy;
      if (r2 == 0.0) {
        coincident = true;
        continue;
      }
      s += coupling / r2;
    }
    out[i] = coincident ? cap : std::min(cap, s);
  }
}

// Same operation order as the scalar reference, so results agree bitwise.
void adam_update_avx2(double* params, const double* grads, double* m, double* v, std::size_t n,
                      const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d g = _mm256_loadu_pd(grads + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(ob1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(ob2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(params + i, _mm256_sub_pd(_mm256_loadu_pd(params + i), step));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grads[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * (grads[i] * grads[i]);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

constexpr KernelTable kAvx2{
    Isa::Avx2,       dot_avx2,           axpy_avx2,         sum_squares_avx2,
    scale_avx2,      tanh_backward_avx2, hydro_weights_avx2, adam_update_avx2,
};

}  // namespace

const KernelTable* avx2_table_unchecked() noexcept { return &kAvx2; }

}  // namespace swarmnav::simd
