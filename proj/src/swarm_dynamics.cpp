#include "swarmnav/swarm_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "swarmnav/errors.hpp"
#include "swarmnav/simd/kernels.hpp"

namespace swarmnav::dynamics {

void SwimmerInit::validate() const {
  const int n = swimmer_count();
  if (n != 4 && n != 9 && n != 16 && n != 25) {
    throw ConfigError("swimmer count must be 4, 9, 16 or 25, got " + std::to_string(n));
  }
  if (!(spacing > 0.0)) throw ConfigError("swimmer spacing must be positive");
  if (!(orientation_hi > orientation_lo)) throw ConfigError("empty orientation range");
}

bool TargetSpec::contains(double x, double y) const noexcept {
  return std::hypot(x - center.x, y - center.y) <= radius;
}

void PhysicsConfig::validate() const {
  if (!(velocity > 0.0) || !(dt > 0.0)) throw ConfigError("velocity and dt must be positive");
  if (!(hydro_coupling > 0.0)) throw ConfigError("hydro coupling must be positive");
  if (hydro_cap != 1.0) throw ConfigError("hydro cap must be 1");
  if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (!(abort_distance > 0.0)) throw ConfigError("abort distance must be positive");
}

std::string_view to_string(TerminationReason reason) noexcept {
  switch (reason) {
    case TerminationReason::None:
      return "none";
    case TerminationReason::AllAbsorbed:
      return "all_absorbed";
    case TerminationReason::MaxSteps:
      return "max_steps";
    case TerminationReason::DriftedAway:
      return "drifted_away";
  }
  return "none";
}

int SwarmState::absorbed_count() const noexcept {
  return static_cast<int>(std::count(absorbed.begin(), absorbed.end(), std::uint8_t{1}));
}

Vec2 SwarmState::mean_position() const noexcept {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  return {std::accumulate(xs.begin(), xs.end(), 0.0) / n, std::accumulate(ys.begin(), ys.end(), 0.0) / n};
}

double wrap_angle(double radians) noexcept {
  double w = std::fmod(radians, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

double hydro_weight(std::span<const double> xs, std::span<const double> ys,
                    std::span<const std::uint8_t> absorbed, std::size_t i, double coupling, double cap) {
  double sum = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (j == i || absorbed[j]) continue;
    const double dx = xs[j] - xs[i];
    const double dy = ys[j] - ys[i];
    const double r2 = dx * dx + dy * dy;
    if (r2 == 0.0) return cap;
    sum += coupling / r2;
  }
  return std::min(cap, sum);
}

void hydro_weights(const SwarmState& state, const PhysicsConfig& cfg, std::span<double> out) {
  if (out.size() != state.size()) throw DimensionError("hydro_weights output size mismatch");
  simd::active().hydro_weights(state.xs.data(), state.ys.data(), state.absorbed.data(), out.data(),
                               state.size(), cfg.hydro_coupling, cfg.hydro_cap);
}

StepOutcome step(SwarmState& state, const TargetSpec& target, double theta_m, const PhysicsConfig& cfg) {
  if (state.terminated) throw ContractViolation("step called on a terminated episode");
  const std::size_t n = state.size();
  const double commanded = wrap_angle(theta_m);
  const double ds = cfg.step_length();

  thread_local std::vector<double> rho;
  rho.resize(n);
  hydro_weights(state, cfg, rho);

  StepOutcome out;
  for (std::size_t i = 0; i < n; ++i) {
    if (state.absorbed[i]) continue;
    const double heading = effective_angle(commanded, rho[i], cfg.hydro_phase_offset);
    state.xs[i] += ds * std::cos(heading);
    state.ys[i] += ds * std::sin(heading);
    state.thetas[i] = wrap_angle(heading);
    if (target.contains(state.xs[i], state.ys[i])) {
      state.absorbed[i] = 1;
      ++out.reward;
    }
  }
  ++state.step_count;

  const Vec2 mean = state.mean_position();
  if (state.absorbed_count() == static_cast<int>(n)) {
    out.reason = TerminationReason::AllAbsorbed;
  } else if (std::hypot(mean.x - target.center.x, mean.y - target.center.y) > cfg.abort_distance) {
    out.reason = TerminationReason::DriftedAway;
  } else if (state.step_count >= cfg.max_steps) {
    out.reason = TerminationReason::MaxSteps;
  }
  out.terminated = out.reason != TerminationReason::None;
  state.terminated = out.terminated;
  state.reason = out.reason;
  return out;
}

TargetSampler fixed_target(TargetSpec target) {
  return [target](Rng&, Vec2) { return target; };
}

TargetSampler uniform_square_target(double half_extent, double radius_min, double radius_max) {
  if (!(half_extent > 0.0) || !(radius_min > 0.0) || radius_max < radius_min) {
    throw ConfigError("invalid square target sampler bounds");
  }
  return [=](Rng& rng, Vec2 mean) {
    std::uniform_real_distribution<double> offset(-half_extent, half_extent);
    std::uniform_real_distribution<double> radius(radius_min, radius_max);
    TargetSpec t;
    t.center.x = mean.x + offset(rng);
    t.center.y = mean.y + offset(rng);
    t.radius = radius(rng);
    return t;
  };
}

TargetSampler uniform_disc_target(double max_distance, double radius_min, double radius_max) {
  if (!(max_distance > 0.0) || !(radius_min > 0.0) || radius_max < radius_min) {
    throw ConfigError("invalid disc target sampler bounds");
  }
  return [=](Rng& rng, Vec2 mean) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> radius(radius_min, radius_max);
    const double d = max_distance * std::sqrt(unit(rng));
    const double phi = kTwoPi * unit(rng);
    TargetSpec t;
    t.center = {mean.x + d * std::cos(phi), mean.y + d * std::sin(phi)};
    t.radius = radius(rng);
    return t;
  };
}

std::pair<std::vector<double>, std::vector<double>> lattice_positions(const SwimmerInit& init) {
  const int side = init.grid_side;
  const double half = 0.5 * static_cast<double>(side - 1) * init.spacing;
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(static_cast<std::size_t>(side * side));
  ys.reserve(static_cast<std::size_t>(side * side));
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      xs.push_back(static_cast<double>(c) * init.spacing - half);
      ys.push_back(static_cast<double>(r) * init.spacing - half);
    }
  }
  return {std::move(xs), std::move(ys)};
}

std::pair<SwarmState, TargetSpec> reset(const SwimmerInit& init, const TargetSampler& sampler,
                                        const PhysicsConfig& cfg, Rng& rng) {
  init.validate();
  cfg.validate();
  SwarmState s;
  auto [xs, ys] = lattice_positions(init);
  s.xs = std::move(xs);
  s.ys = std::move(ys);
  const std::size_t n = s.xs.size();
  s.thetas.resize(n);
  std::uniform_real_distribution<double> heading(init.orientation_lo, init.orientation_hi);
  for (auto& th : s.thetas) th = wrap_angle(heading(rng));
  s.absorbed.assign(n, 0);

  const Vec2 mean = s.mean_position();
  for (int attempt = 0; attempt < kMaxTargetRetries; ++attempt) {
    const TargetSpec t = sampler(rng, mean);
    bool overlaps = false;
    for (std::size_t i = 0; i < n && !overlaps; ++i) overlaps = t.contains(s.xs[i], s.ys[i]);
    if (!overlaps) return {std::move(s), t};
  }
  throw ConfigError("target sampler produced overlapping targets " + std::to_string(kMaxTargetRetries) +
                    " times in a row");
}

SwarmEnv::SwarmEnv(SwimmerInit init, PhysicsConfig physics, TargetSampler sampler, std::uint64_t seed,
                   EpisodeStartHook on_start)
    : init_(init), physics_(physics), sampler_(std::move(sampler)), on_start_(std::move(on_start)), rng_(seed) {
  init_.validate();
  physics_.validate();
  reset();
}

void SwarmEnv::reset() {
  auto [s, t] = dynamics::reset(init_, sampler_, physics_, rng_);
  state_ = std::move(s);
  state_.episode_index = episodes_started_++;
  target_ = t;
  episode_tag_ = on_start_ ? on_start_() : std::numeric_limits<double>::quiet_NaN();
}

StepOutcome SwarmEnv::step(double theta_m) { return dynamics::step(state_, target_, theta_m, physics_); }

void SwarmEnv::restore(SwarmState state, TargetSpec target, long episodes_started, double episode_tag) {
  if (state.size() != static_cast<std::size_t>(init_.swimmer_count())) {
    throw DimensionError("restored swarm has wrong swimmer count");
  }
  state_ = std::move(state);
  target_ = target;
  episodes_started_ = episodes_started;
  episode_tag_ = episode_tag;
}

}  // namespace swarmnav::dynamics
