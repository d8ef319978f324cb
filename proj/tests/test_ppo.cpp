#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "swarmnav/errors.hpp"
#include "swarmnav/ppo.hpp"

using namespace swarmnav;
using namespace swarmnav::rl;

namespace {

std::vector<std::uint8_t> random_dones(std::size_t n, double p, Rng& rng) {
  std::bernoulli_distribution d(p);
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<double> randu(std::size_t n, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Minibatch single(const nn::ActorCritic& policy, double ratio, double adv) {
  Minibatch mb;
  mb.obs_dim = policy.obs_dim();
  mb.obs.assign(mb.obs_dim, 0.25);
  const double mu = policy.action_mean(mb.obs);
  const double a = mu + 0.3;
  mb.actions = {a};
  mb.logprobs = {nn::gaussian_logprob_entropy(mu, policy.log_std(), a).logp - std::log(ratio)};
  mb.advantages = {adv};
  mb.returns = {0.0};
  mb.values = {policy.value(mb.obs)};
  return mb;
}

Trainer small_trainer(Algo algo, double alpha, std::uint64_t seed, int num_envs = 2) {
  TrainConfig cfg;
  cfg.algo = algo;
  cfg.rpo_alpha = alpha;
  cfg.num_envs = num_envs;
  cfg.rollout_horizon = 128;
  cfg.minibatches = 4;
  cfg.update_epochs = 3;
  cfg.total_timesteps = 10 * cfg.batch_size();
  std::vector<dynamics::SwarmEnv> envs;
  for (int e = 0; e < num_envs; ++e) {
    envs.emplace_back(dynamics::SwimmerInit{2, 6.0}, dynamics::PhysicsConfig{},
                      dynamics::uniform_square_target(30.0, 5.0, 20.0), derive_seed(seed, 100 + e));
  }
  return Trainer(cfg, std::move(envs), {obs::EncodingMode::FullState, false}, seed);
}

}  // namespace

TEST_SUITE("ppo") {
  TEST_CASE("gae hand-computed examples") {
    const std::vector<std::uint8_t> term{1};
    auto r = compute_gae(std::vector<double>{1.0}, std::vector<double>{0.6}, term, 123.0, 0.99, 0.95);
    CHECK(r.advantages[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(r.returns[0] == doctest::Approx(1.0).epsilon(1e-15));

    auto two = compute_gae(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 0.6},
                           std::vector<std::uint8_t>{0, 1}, 0.0, 0.99, 0.95);
    CHECK(std::abs(two.advantages[1] - 0.4) < 1e-12);
    CHECK(std::abs(two.advantages[0] - 0.4702) < 1e-12);
  }

  TEST_CASE("gae closed forms for lambda 0 and 1 and gamma 0") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t T = 50;
      const auto r = randu(T, rng, -1.0, 2.0);
      const auto v = randu(T, rng, -1.0, 1.0);
      const auto d = random_dones(T, trial % 2 ? 0.1 : 0.0, rng);
      const double vT = 0.37;
      const double gamma = 0.97;

      const auto zero = compute_gae(r, v, d, vT, gamma, 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        const double next = t + 1 == T ? vT : v[t + 1];
        const double delta = r[t] + gamma * next * (d[t] ? 0.0 : 1.0) - v[t];
        CHECK(std::abs(zero.advantages[t] - delta) < 1e-10);
      }

      const auto one = compute_gae(r, v, d, vT, gamma, 1.0);
      for (std::size_t t = 0; t < T; ++t) {
        double g = 0.0;
        double disc = 1.0;
        bool ended = false;
        for (std::size_t k = t; k < T; ++k) {
          g += disc * r[k];
          disc *= gamma;
          if (d[k]) {
            ended = true;
            break;
          }
        }
        if (!ended) g += disc * vT;
        CHECK(std::abs(one.advantages[t] - (g - v[t])) < 1e-10);
      }

      const auto myopic = compute_gae(r, v, d, vT, 0.0, 0.95);
      for (std::size_t t = 0; t < T; ++t) CHECK(std::abs(myopic.advantages[t] - (r[t] - v[t])) < 1e-12);
    }
  }

  TEST_CASE("gae equals the lambda-weighted n-step oracle") {
    Rng rng(2);
    for (double lambda : {0.0, 0.3, 0.95, 1.0}) {
      for (int trial = 0; trial < 10; ++trial) {
        const std::size_t T = 50;
        const auto r = randu(T, rng, 0.0, 1.0);
        const auto v = randu(T, rng, -2.0, 2.0);
        const auto d = random_dones(T, 0.08, rng);
        const auto got = compute_gae(r, v, d, -0.4, 0.99, lambda);
        const auto want = oracle::lambda_return_advantages(r, v, d, -0.4, 0.99, lambda);
        for (std::size_t t = 0; t < T; ++t) {
          CHECK(std::abs(got.advantages[t] - want[t]) < 1e-10);
          CHECK(got.returns[t] == got.advantages[t] + v[t]);
        }
      }
    }
  }

  TEST_CASE("multi-env gae treats every column independently") {
    Rng rng(3);
    const std::size_t T = 30, E = 3;
    const auto r = randu(T * E, rng, 0.0, 1.0);
    const auto v = randu(T * E, rng, -1.0, 1.0);
    const auto d = random_dones(T * E, 0.1, rng);
    const std::vector<double> boot{0.1, -0.2, 0.3};
    std::vector<double> adv(T * E), ret(T * E);
    compute_gae(r, v, d, boot, E, 0.99, 0.95, adv, ret);
    for (std::size_t e = 0; e < E; ++e) {
      std::vector<double> rc, vc;
      std::vector<std::uint8_t> dc;
      for (std::size_t t = 0; t < T; ++t) {
        rc.push_back(r[t * E + e]);
        vc.push_back(v[t * E + e]);
        dc.push_back(d[t * E + e]);
      }
      const auto single = compute_gae(rc, vc, dc, boot[e], 0.99, 0.95);
      for (std::size_t t = 0; t < T; ++t) CHECK(adv[t * E + e] == single.advantages[t]);
    }
    CHECK_THROWS_AS(compute_gae(r, v, d, boot, 4, 0.99, 0.95, adv, ret), DimensionError);
  }

  TEST_CASE("clipped surrogate arithmetic") {
    Rng rng(4);
    nn::ActorCritic policy(3, {8}, rng);
    const std::vector<double> zero{0.0};
    std::vector<double> grad(policy.params().size());
    const LossConfig cfg;
    CHECK(ppo_loss_and_grad(policy, single(policy, 1.5, 1.0), zero, cfg, grad).policy_loss ==
          doctest::Approx(-1.2).epsilon(1e-12));
    CHECK(ppo_loss_and_grad(policy, single(policy, 0.5, -1.0), zero, cfg, grad).policy_loss ==
          doctest::Approx(0.8).epsilon(1e-12));
    const auto t = ppo_loss_and_grad(policy, single(policy, 1.0, 0.7), zero, cfg, grad);
    CHECK(t.policy_loss == doctest::Approx(-0.7).epsilon(1e-12));
    CHECK(std::abs(t.approx_kl) < 1e-15);
    CHECK(t.clip_fraction == 0.0);
  }

  TEST_CASE("full loss gradient matches central differences") {
    Rng rng(5);
    for (bool clip_v : {true, false}) {
      for (double ent : {0.0, 0.01}) {
        nn::ActorCritic policy(15, {64}, rng);
        // Move off the initialisation so the actor head and log-std matter.
        for (auto& p : policy.params()) p += 0.05 * std::normal_distribution<double>(0.0, 1.0)(rng);
        policy.params()[policy.log_std_index()] = -0.4;
        const auto shift = randu(32, rng, -0.5, 0.5);
        const auto mb = oracle::random_minibatch(policy, 32, 0.2, 1e-3, rng, shift);
        const LossConfig cfg{0.2, 0.5, ent, clip_v};
        std::vector<double> grad(policy.params().size());
        ppo_loss_and_grad(policy, mb, shift, cfg, grad);
        std::vector<double> scratch(grad.size());
        auto f = [&] { return ppo_loss_and_grad(policy, mb, shift, cfg, scratch).total; };
        const auto fd = oracle::central_difference(f, policy.params(), 1e-6);
        CHECK(oracle::relative_error(grad, fd) < 1e-5);
      }
    }
  }

  TEST_CASE("rpo perturbation statistics") {
    Rng rng(6);
    const double alpha = 0.5;
    const int n = 1'000'000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double p = rpo_perturb(2.0, alpha, rng);
      REQUIRE(std::abs(p - 2.0) <= alpha);
      sum += p - 2.0;
    }
    CHECK(std::abs(sum / n) <= 3.0 * alpha / std::sqrt(3.0 * n));
    CHECK(rpo_perturb(1.25, 0.0, rng) == 1.25);
  }

  TEST_CASE("advantage normalisation") {
    Rng rng(7);
    auto a = randu(64, rng, -3.0, 9.0);
    normalize_advantages(a);
    const double m = std::accumulate(a.begin(), a.end(), 0.0) / 64.0;
    double ss = 0.0;
    for (double x : a) ss += (x - m) * (x - m);
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(std::sqrt(ss / 63.0) - 1.0) < 1e-6);
    std::vector<double> one{5.0};
    normalize_advantages(one);
    CHECK(one[0] == 5.0);
  }

  TEST_CASE("gradient norm clipping") {
    Rng rng(8);
    auto g = randu(100, rng, -1.0, 1.0);
    const double before = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
    CHECK(clip_grad_norm(g, 0.5) == doctest::Approx(before));
    CHECK(std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0)) <= 0.5 + 1e-9);
    std::vector<double> small{0.1, 0.1};
    clip_grad_norm(small, 0.5);
    CHECK(small == std::vector<double>{0.1, 0.1});
  }

  TEST_CASE("buffer capacity") {
    RolloutBuffer b(2048, 4, 15);
    CHECK(b.size() == 8192);
    CHECK(b.obs.size() == 8192 * 15);
    CHECK(b.index(3, 2) == 14);
  }

  TEST_CASE("dones mark exactly the terminal transitions") {
    auto trainer = small_trainer(Algo::PPO, 0.5, 9);
    std::vector<EpisodeRecord> eps;
    trainer.on_episode = [&](const EpisodeRecord& r) { eps.push_back(r); };
    trainer.collect_rollout();
    const auto& b = trainer.buffer();
    std::size_t done_count = 0;
    for (auto d : b.dones) done_count += d;
    CHECK(done_count == eps.size());
    for (const auto& r : eps) {
      CHECK(r.length <= 500);
      CHECK(r.episode_return <= 4);
      const std::size_t t = static_cast<std::size_t>(r.global_step / 2 - 1);
      CHECK(b.dones[b.index(t, static_cast<std::size_t>(r.env))] == 1);
    }
  }

  TEST_CASE("first minibatch ratios are one") {
    auto trainer = small_trainer(Algo::PPO, 0.5, 10);
    trainer.collect_rollout();
    const auto& b = trainer.buffer();
    Minibatch mb;
    mb.obs_dim = b.obs_dim;
    mb.obs = b.obs;
    mb.actions = b.actions;
    mb.logprobs = b.logprobs;
    mb.advantages.assign(b.size(), 1.0);
    mb.returns = b.values;
    mb.values = b.values;
    std::vector<double> grad(trainer.policy().params().size());
    const std::vector<double> zero(b.size(), 0.0);
    const auto t = ppo_loss_and_grad(trainer.policy(), mb, zero, LossConfig{}, grad);
    CHECK(std::abs(t.old_approx_kl) < 1e-12);
    CHECK(t.policy_loss == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(t.clip_fraction == 0.0);
  }

  TEST_CASE("rpo with alpha zero reproduces ppo bit for bit") {
    auto ppo = small_trainer(Algo::PPO, 0.0, 11);
    auto rpo = small_trainer(Algo::RPO, 0.0, 11);
    for (int u = 0; u < 4; ++u) {
      ppo.run_update();
      rpo.run_update();
      CHECK(ppo.policy() == rpo.policy());
    }
    auto real = small_trainer(Algo::RPO, 0.5, 11);
    auto base = small_trainer(Algo::PPO, 0.0, 11);
    real.run_update();
    base.run_update();
    CHECK_FALSE(real.policy() == base.policy());
  }

  TEST_CASE("training is deterministic") {
    auto run = [] {
      auto t = small_trainer(Algo::RPO, 0.5, 12);
      std::vector<double> trace;
      for (int u = 0; u < 3; ++u) trace.push_back(t.run_update().policy_loss);
      trace.insert(trace.end(), t.policy().params().begin(), t.policy().params().end());
      return trace;
    };
    CHECK(run() == run());
  }

  TEST_CASE("learning rate anneals linearly") {
    auto t = small_trainer(Algo::PPO, 0.5, 13);
    const double lr = t.config().lr;
    for (int u = 0; u < 3; ++u) {
      const auto d = t.run_update();
      CHECK(d.lr == doctest::Approx(lr * (1.0 - u / 10.0)).epsilon(1e-15));
      CHECK(d.global_step == (u + 1) * t.config().batch_size());
    }
  }

  TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.minibatches = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.gamma = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(algo_from_string("rpo") == Algo::RPO);
    CHECK_THROWS_AS(algo_from_string("a2c"), ConfigError);
  }

  TEST_CASE("seed derivation separates streams") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  }
}
