#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "swarmnav/errors.hpp"
#include "swarmnav/nn.hpp"

using namespace swarmnav;
using namespace swarmnav::nn;

namespace {

std::vector<double> randn(std::size_t n, Rng& rng, double s = 1.0) {
  std::normal_distribution<double> d(0.0, s);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Plain nested-loop forward pass, written against the out x in convention.
std::vector<double> reference_forward(const Mlp& net, std::span<const double> p, std::vector<double> x) {
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    std::vector<double> y(L.out);
    for (std::size_t o = 0; o < L.out; ++o) {
      double s = p[L.bias_offset + o];
      for (std::size_t k = 0; k < L.in; ++k) s += Mlp::weight(p, L, o, k) * x[k];
      y[o] = l + 1 < layers.size() ? std::tanh(s) : s;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("zero network outputs zero") {
    Mlp net({3, {5}, Activation::Tanh, 2});
    std::vector<double> p(net.param_count(), 0.0);
    auto [y, tape] = net.forward(p, std::vector<double>{1.0, -2.0, 3.0});
    CHECK(y == std::vector<double>{0.0, 0.0});
  }

  TEST_CASE("forward matches the nested-loop oracle") {
    Rng rng(1);
    for (auto hidden : {std::vector<std::size_t>{64}, std::vector<std::size_t>{7, 5}, std::vector<std::size_t>{1}}) {
      Mlp net({6, hidden, Activation::Tanh, 3});
      const auto p = randn(net.param_count(), rng, 0.5);
      for (int k = 0; k < 10; ++k) {
        const auto x = randn(6, rng);
        const auto y = net.forward(p, x).first;
        const auto ref = reference_forward(net, p, x);
        for (std::size_t o = 0; o < 3; ++o) CHECK(std::abs(y[o] - ref[o]) <= 1e-12);
      }
    }
  }

  TEST_CASE("forward rejects bad input") {
    Mlp net({2, {4}, Activation::Tanh, 1});
    std::vector<double> p(net.param_count(), 0.1);
    CHECK_THROWS_AS(net.forward(p, std::vector<double>{1.0}), DimensionError);
    CHECK_THROWS(net.forward(p, std::vector<double>{1.0, std::nan("")}));
  }

  TEST_CASE("backward matches central differences") {
    Rng rng(2);
    for (auto hidden : {std::vector<std::size_t>{64}, std::vector<std::size_t>{8, 6}}) {
      Mlp net({5, hidden, Activation::Tanh, 2});
      auto p = randn(net.param_count(), rng, 0.4);
      const auto x = randn(5, rng);
      const std::vector<double> w{0.7, -1.3};
      auto loss = [&] {
        const auto y = net.forward(p, x).first;
        return w[0] * y[0] + w[1] * y[1];
      };
      auto [y, tape] = net.forward(p, x);
      std::vector<double> g(p.size(), 0.0);
      net.backward(p, tape, w, g);
      const auto fd = oracle::central_difference(loss, p, 1e-5);
      CHECK(oracle::relative_error(g, fd) < 1e-6);
    }
  }

  TEST_CASE("linear single-unit gradient and zero output gradient") {
    Mlp net({1, {1}, Activation::Tanh, 1});
    Rng rng(3);
    auto p = randn(net.param_count(), rng);
    auto [y, tape] = net.forward(p, std::vector<double>{0.3});
    std::vector<double> g(p.size(), 0.0);
    net.backward(p, tape, std::vector<double>{0.0}, g);
    for (double v : g) CHECK(v == 0.0);

    // Output layer weight gradient is the hidden activation feeding it.
    net.backward(p, tape, std::vector<double>{1.0}, g);
    const auto& in = net.layers().front();
    const auto& out = net.layers().back();
    CHECK(g[out.weight_offset] == doctest::Approx(std::tanh(p[in.weight_offset] * 0.3 + p[in.bias_offset])));
    CHECK(g[out.bias_offset] == 1.0);
  }

  TEST_CASE("backward refuses a tape from another network or buffer") {
    Mlp a({2, {3}, Activation::Tanh, 1});
    Mlp b({2, {3}, Activation::Tanh, 1});
    std::vector<double> p(a.param_count(), 0.2);
    std::vector<double> q = p;
    auto [y, tape] = a.forward(p, std::vector<double>{1.0, 2.0});
    std::vector<double> g(p.size(), 0.0);
    CHECK_THROWS_AS(b.backward(p, tape, std::vector<double>{1.0}, g), ContractViolation);
    CHECK_THROWS_AS(a.backward(q, tape, std::vector<double>{1.0}, g), ContractViolation);
  }

  TEST_CASE("orthogonal matrices") {
    Rng rng(4);
    for (auto [r, c] : {std::pair<std::size_t, std::size_t>{64, 15}, {1, 64}, {64, 64}, {5, 9}}) {
      const double gain = std::sqrt(2.0);
      const auto m = orthogonal_matrix(r, c, gain, rng);
      const std::size_t k = std::min(r, c);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          double s = 0.0;
          if (r <= c) {
            for (std::size_t t = 0; t < c; ++t) s += m[i * c + t] * m[j * c + t];
          } else {
            for (std::size_t t = 0; t < r; ++t) s += m[t * c + i] * m[t * c + j];
          }
          CHECK(std::abs(s - (i == j ? gain * gain : 0.0)) < 1e-8);
        }
      }
    }
  }

  TEST_CASE("actor critic initialisation") {
    Rng rng(5);
    ActorCritic ac(15, {64}, rng);
    CHECK(ac.log_std() == 0.0);
    CHECK(ac.params().size() == ac.actor().param_count() + 1 + ac.critic().param_count());
    const auto& hidden = ac.actor().layers().front();
    const auto p = ac.actor_params();
    for (std::size_t i = 0; i < hidden.in; ++i) {
      for (std::size_t j = 0; j < hidden.in; ++j) {
        double s = 0.0;
        for (std::size_t o = 0; o < hidden.out; ++o) s += Mlp::weight(p, hidden, o, i) * Mlp::weight(p, hidden, o, j);
        CHECK(std::abs(s - (i == j ? 2.0 : 0.0)) < 1e-8);
      }
    }
    const auto& head = ac.actor().layers().back();
    double norm = 0.0;
    for (std::size_t k = 0; k < head.in; ++k) norm += Mlp::weight(p, head, 0, k) * Mlp::weight(p, head, 0, k);
    CHECK(std::sqrt(norm) == doctest::Approx(0.01).epsilon(1e-10));
    const auto& vhead = ac.critic().layers().back();
    const auto c = ac.critic_params();
    norm = 0.0;
    for (std::size_t k = 0; k < vhead.in; ++k) norm += Mlp::weight(c, vhead, 0, k) * Mlp::weight(c, vhead, 0, k);
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-10));
    for (std::size_t o = 0; o < hidden.out; ++o) CHECK(p[hidden.bias_offset + o] == 0.0);
  }

  TEST_CASE("actor critic is pure and deterministic") {
    Rng r1(6), r2(6);
    ActorCritic a(9, {64}, r1), b(9, {64}, r2);
    CHECK(a == b);
    const std::vector<double> x{0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8, 0.9};
    CHECK(a.action_mean(x) == a.action_mean(x));
    CHECK(a.value(x) == b.value(x));
  }

  TEST_CASE("gaussian log-probability and entropy") {
    const double half_log_2pi = 0.5 * std::log(2.0 * kPi);
    auto g = gaussian_logprob_entropy(0.3, 0.0, 0.3);
    CHECK(g.logp == doctest::Approx(-half_log_2pi).epsilon(1e-15));
    CHECK(g.entropy == doctest::Approx(0.5 + half_log_2pi).epsilon(1e-15));
    CHECK(g.entropy == doctest::Approx(1.4189385332));
    const double ls = -0.7;
    const auto h = gaussian_logprob_entropy(1.0, ls, 2.5);
    const double s = std::exp(ls);
    CHECK(h.logp == doctest::Approx(-0.5 * (1.5 / s) * (1.5 / s) - ls - half_log_2pi).epsilon(1e-14));
    double prev = 1.0;
    for (double d = 0.0; d < 4.0; d += 0.25) {
      const double lp = gaussian_logprob_entropy(0.0, 0.2, d).logp;
      CHECK(lp < prev);
      prev = lp;
    }
  }

  TEST_CASE("adam first step and zero gradient") {
    Adam adam(1, AdamConfig{0.1, 0.9, 0.999, 1e-8});
    std::vector<double> p{0.0};
    CHECK(adam.step(p, std::vector<double>{1.0}));
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-7));
    CHECK(adam.timestep() == 1);

    Adam still(3, AdamConfig{});
    std::vector<double> q{1.0, 2.0, 3.0};
    still.step(q, std::vector<double>{0.0, 0.0, 0.0});
    CHECK(q == std::vector<double>{1.0, 2.0, 3.0});
  }

  TEST_CASE("adam matches a hand-written reference over many steps") {
    Rng rng(7);
    const std::size_t n = 37;
    const AdamConfig cfg{3e-3, 0.9, 0.999, 1e-8};
    Adam adam(n, cfg);
    auto p = randn(n, rng);
    auto ref = p;
    std::vector<double> m(n, 0.0), v(n, 0.0);
    for (int t = 1; t <= 25; ++t) {
      const auto g = randn(n, rng);
      adam.step(p, g);
      const double bc1 = 1.0 - std::pow(cfg.beta1, t);
      const double bc2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        ref[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
      }
    }
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - ref[i]) < 1e-12);
  }

  TEST_CASE("adam skips non-finite gradients") {
    Adam adam(2, AdamConfig{});
    std::vector<double> p{1.0, 1.0};
    const auto before = adam;
    CHECK_FALSE(adam.step(p, std::vector<double>{1.0, std::nan("")}));
    CHECK(p == std::vector<double>{1.0, 1.0});
    CHECK(adam.skipped_steps() == 1);
    CHECK(adam.timestep() == before.timestep());
    CHECK(adam.first_moment() == before.first_moment());
  }

  TEST_CASE("adam is deterministic") {
    Rng rng(8);
    const auto g = randn(10, rng);
    Adam a(10, AdamConfig{}), b(10, AdamConfig{});
    auto p = randn(10, rng);
    auto q = p;
    a.step(p, g);
    b.step(q, g);
    CHECK(p == q);
    CHECK(a == b);
  }
}
