#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "swarmnav/curriculum.hpp"
#include "swarmnav/errors.hpp"

using namespace swarmnav;
using namespace swarmnav::curriculum;

TEST_SUITE("curriculum") {
  TEST_CASE("distance schedule") {
    const CurriculumSpec spec{20.0, 100.0, 1000.0};
    CHECK(max_distance(0.0, spec) == 20.0);
    CHECK(max_distance(1000.0, spec) == doctest::Approx(100.0 - 80.0 / std::exp(1.0)).epsilon(1e-15));
    double prev = max_distance(0.0, spec);
    for (double e = 1.0; e < 20000.0; e *= 1.7) {
      const double d = max_distance(e, spec);
      CHECK(d > prev);
      CHECK(d < 100.0);
      CHECK(d >= 20.0);
      prev = d;
    }
    const CurriculumSpec flat{50.0, 50.0, 10.0};
    for (double e : {0.0, 3.0, 1e6}) CHECK(max_distance(e, flat) == 50.0);
  }

  TEST_CASE("spec validation") {
    CHECK_THROWS_AS((CurriculumSpec{0.0, 100.0, 1000.0}.validate()), ConfigError);
    CHECK_THROWS_AS((CurriculumSpec{120.0, 100.0, 1000.0}.validate()), ConfigError);
    CHECK_THROWS_AS((CurriculumSpec{20.0, 100.0, 0.0}.validate()), ConfigError);
    CHECK_NOTHROW((CurriculumSpec{20.0, 20.0, 1.0}.validate()));
  }

  TEST_CASE("samples respect the current bound") {
    CurriculumSchedule sched({20.0, 100.0, 1000.0});
    Rng rng(1);
    for (int k = 0; k < 5000; ++k) {
      const double bound = sched.current_max_distance();
      const Vec2 mean{3.0, -2.0};
      const auto t = sched.sample(rng, mean);
      CHECK(std::hypot(t.center.x - mean.x, t.center.y - mean.y) <= bound);
      CHECK((t.radius >= 5.0 && t.radius <= 20.0));
    }
    CHECK(sched.episode_counter() == 5000);
  }

  TEST_CASE("early targets stay within the starting distance") {
    CurriculumSchedule sched({20.0, 100.0, 1000.0});
    Rng rng(2);
    for (int k = 0; k < 200; ++k) {
      const auto t = sched.draw(rng, {0.0, 0.0});
      CHECK(std::hypot(t.center.x, t.center.y) <= 20.0);
    }
    CHECK(sched.episode_counter() == 0);
  }

  TEST_CASE("sampled distances follow the uniform disc law") {
    CurriculumSchedule sched({60.0, 60.0, 1.0});
    Rng rng(3);
    const std::size_t n = 100'000;
    std::vector<double> r(n);
    for (auto& x : r) {
      const auto t = sched.draw(rng, {0.0, 0.0});
      x = std::hypot(t.center.x, t.center.y);
    }
    std::sort(r.begin(), r.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double cdf = (r[i] / 60.0) * (r[i] / 60.0);
      ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / n), std::abs(cdf - static_cast<double>(i + 1) / n)});
    }
    // Kolmogorov-Smirnov critical value at the 1% level.
    CHECK(ks < 1.628 / std::sqrt(static_cast<double>(n)));
  }

  TEST_CASE("shared counter advances once per episode start across environments") {
    auto sched = std::make_shared<CurriculumSchedule>(CurriculumSpec{20.0, 100.0, 1000.0});
    auto hook = [sched] { return sched->commit_episode(); };
    std::vector<dynamics::SwarmEnv> envs;
    for (int e = 0; e < 3; ++e) {
      envs.emplace_back(dynamics::SwimmerInit{2, 6.0}, dynamics::PhysicsConfig{}, curriculum_sampler(sched),
                        static_cast<std::uint64_t>(e + 1), hook);
    }
    CHECK(sched->episode_counter() == 3);
    envs[1].reset();
    envs[1].reset();
    envs[0].reset();
    CHECK(sched->episode_counter() == 6);
    // Each environment's tag is the bound in force when its episode began.
    CHECK(envs[0].episode_tag() == max_distance(5.0, sched->spec()));
  }

  TEST_CASE("commit returns the bound used for the draw") {
    CurriculumSchedule sched({20.0, 100.0, 10.0});
    const double d0 = sched.current_max_distance();
    CHECK(sched.commit_episode() == d0);
    CHECK(sched.current_max_distance() > d0);
    sched.restore(0);
    CHECK(sched.current_max_distance() == d0);
  }
}
