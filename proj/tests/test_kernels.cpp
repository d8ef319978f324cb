#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "swarmnav/simd/kernels.hpp"

using namespace swarmnav;

namespace {

std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Lengths that hit the empty case, pure tails, exact multiples and both.
const std::size_t kLengths[] = {0, 1, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 65, 130};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar table is always available and active can be forced") {
    CHECK(simd::scalar_kernels().isa == simd::Isa::Scalar);
    const auto before = simd::active().isa;
    CHECK(simd::select(simd::Isa::Scalar));
    CHECK(simd::active().isa == simd::Isa::Scalar);
    simd::select(before);
  }

  TEST_CASE("avx2 matches the scalar reference") {
    const simd::KernelTable* avx = simd::avx2_kernels();
    if (!avx) {
      MESSAGE("AVX2 not available on this machine; equivalence skipped");
      return;
    }
    const simd::KernelTable& ref = simd::scalar_kernels();
    Rng rng(7);

    for (std::size_t n : kLengths) {
      CAPTURE(n);
      const auto a = random_vector(n, rng);
      const auto b = random_vector(n, rng);

      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
      CHECK(std::abs(avx->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-14 * (mag + 1.0));
      CHECK(std::abs(avx->sum_squares(a.data(), n) - ref.sum_squares(a.data(), n)) <=
            1e-14 * (ref.sum_squares(a.data(), n) + 1.0));

      auto y1 = b, y2 = b;
      ref.axpy(0.37, a.data(), y1.data(), n);
      avx->axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (std::abs(y1[i]) + 1.0));

      auto s1 = a, s2 = a;
      ref.scale(-1.7, s1.data(), n);
      avx->scale(-1.7, s2.data(), n);
      CHECK(bitwise_equal(s1, s2));

      std::vector<double> act(n);
      for (std::size_t i = 0; i < n; ++i) act[i] = std::tanh(a[i]);
      auto g1 = b, g2 = b;
      ref.tanh_backward(act.data(), g1.data(), n);
      avx->tanh_backward(act.data(), g2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(g1[i] - g2[i]) <= 1e-15 * (std::abs(g1[i]) + 1e-300));
    }
  }

  TEST_CASE("avx2 adam update is bitwise identical to scalar") {
    const simd::KernelTable* avx = simd::avx2_kernels();
    if (!avx) return;
    Rng rng(11);
    for (std::size_t n : kLengths) {
      auto p1 = random_vector(n, rng), g = random_vector(n, rng), m1 = random_vector(n, rng, 0.1);
      auto v1 = random_vector(n, rng, 0.1);
      for (auto& x : v1) x = x * x;
      auto p2 = p1, m2 = m1, v2 = v1;
      const simd::AdamCoeffs c{3e-4, 0.9, 0.999, 1e-8, 1.0 - std::pow(0.9, 3), 1.0 - std::pow(0.999, 3)};
      simd::scalar_kernels().adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, c);
      avx->adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, c);
      CHECK(bitwise_equal(p1, p2));
      CHECK(bitwise_equal(m1, m2));
      CHECK(bitwise_equal(v1, v2));
    }
  }

  TEST_CASE("hydro weights agree across tables and with the pairwise oracle") {
    Rng rng(3);
    std::uniform_real_distribution<double> pos(-15.0, 15.0);
    std::bernoulli_distribution absorbed(0.2);
    std::vector<const simd::KernelTable*> tables{&simd::scalar_kernels()};
    if (simd::avx2_kernels()) tables.push_back(simd::avx2_kernels());
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + static_cast<std::size_t>(trial % 25);
      std::vector<double> xs(n), ys(n);
      std::vector<std::uint8_t> ab(n);
      for (std::size_t i = 0; i < n; ++i) {
        xs[i] = pos(rng);
        ys[i] = pos(rng);
        ab[i] = absorbed(rng);
      }
      if (n > 2 && trial % 7 == 0) {
        xs[1] = xs[0];
        ys[1] = ys[0];
        ab[0] = ab[1] = 0;
      }
      for (const auto* t : tables) {
        std::vector<double> out(n, -1.0);
        t->hydro_weights(xs.data(), ys.data(), ab.data(), out.data(), n, 2.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (ab[i]) {
            CHECK(out[i] == 0.0);
          } else {
            CHECK(std::abs(out[i] - oracle::hydro_weight(xs, ys, ab, i)) <= 1e-12);
          }
        }
      }
    }
  }
}
