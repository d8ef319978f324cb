#pragma once

// 2D kinematics of a magnetically steered micro-swimmer swarm. Every swimmer
// receives the same commanded heading; neighbours deflect it sideways by a
// hydrodynamic weight that grows with inverse squared distance. Swimmers that
// enter the circular target are absorbed and stay put.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "swarmnav/common.hpp"

namespace swarmnav::dynamics {

struct SwimmerInit {
  int grid_side = 2;     // swimmers per lattice row; N = grid_side^2
  double spacing = 6.0;  // um
  double orientation_lo = 0.0;
  double orientation_hi = kTwoPi;

  int swimmer_count() const noexcept { return grid_side * grid_side; }
  // Throws ConfigError unless N is one of 4, 9, 16, 25 and spacing > 0.
  void validate() const;
};

struct TargetSpec {
  Vec2 center;
  double radius = 10.0;  // um

  bool contains(double x, double y) const noexcept;
  friend bool operator==(const TargetSpec&, const TargetSpec&) = default;
};

struct PhysicsConfig {
  double velocity = 10.0;  // um/s
  double dt = 0.1;         // s
  double hydro_coupling = 2.0;  // um^2
  double hydro_cap = 1.0;
  double hydro_phase_offset = -kPi / 2.0;
  int max_steps = 500;
  double abort_distance = 200.0;  // um, swarm mean to target centre

  double step_length() const noexcept { return velocity * dt; }
  void validate() const;
};

enum class TerminationReason { None, AllAbsorbed, MaxSteps, DriftedAway };

std::string_view to_string(TerminationReason reason) noexcept;

struct StepOutcome {
  int reward = 0;  // swimmers absorbed during this step
  bool terminated = false;
  TerminationReason reason = TerminationReason::None;
};

// Structure-of-arrays so the pairwise kernels can stream coordinates.
struct SwarmState {
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> thetas;  // realised heading of each swimmer, [0, 2pi)
  std::vector<std::uint8_t> absorbed;
  int step_count = 0;
  long episode_index = 0;
  bool terminated = false;
  TerminationReason reason = TerminationReason::None;

  std::size_t size() const noexcept { return xs.size(); }
  int absorbed_count() const noexcept;
  Vec2 mean_position() const noexcept;

  friend bool operator==(const SwarmState&, const SwarmState&) = default;
};

// Wraps any angle into [0, 2pi).
double wrap_angle(double radians) noexcept;

// Hydrodynamic weight of swimmer i: min(cap, sum over other active swimmers
// of coupling / r^2). Absorbed swimmers do not contribute. A coincident
// active neighbour saturates the weight to cap.
double hydro_weight(std::span<const double> xs, std::span<const double> ys,
                    std::span<const std::uint8_t> absorbed, std::size_t i, double coupling = 2.0,
                    double cap = 1.0);

// All weights at once through the SIMD kernel table.
void hydro_weights(const SwarmState& state, const PhysicsConfig& cfg, std::span<double> out);

// Blend of the commanded heading and the transverse drift heading.
inline double effective_angle(double theta_m, double rho, double phase_offset = -kPi / 2.0) noexcept {
  return rho * (theta_m + phase_offset) + (1.0 - rho) * theta_m;
}

// Advances every active swimmer by one time step under commanded heading
// theta_m. Weights come from the pre-move configuration and all swimmers
// move simultaneously. Throws ContractViolation if the episode has ended.
StepOutcome step(SwarmState& state, const TargetSpec& target, double theta_m, const PhysicsConfig& cfg);

// Draws a target given the initial swarm mean. Must be deterministic in rng.
using TargetSampler = std::function<TargetSpec(Rng& rng, Vec2 swarm_mean)>;

TargetSampler fixed_target(TargetSpec target);
// Centre uniform on the square [-half_extent, half_extent]^2 around the swarm mean.
TargetSampler uniform_square_target(double half_extent, double radius_min, double radius_max);
// Centre uniform-in-area on the disc of the given radius around the swarm mean.
TargetSampler uniform_disc_target(double max_distance, double radius_min, double radius_max);

// Grid positions centred on the origin, in row-major order.
std::pair<std::vector<double>, std::vector<double>> lattice_positions(const SwimmerInit& init);

inline constexpr int kMaxTargetRetries = 100;

// Fresh episode: centred lattice, i.i.d. uniform headings, then a target that
// does not already contain any swimmer (up to kMaxTargetRetries draws).
std::pair<SwarmState, TargetSpec> reset(const SwimmerInit& init, const TargetSampler& sampler,
                                        const PhysicsConfig& cfg, Rng& rng);

// Called once after every successful reset; its return value is kept as the
// episode tag (the curriculum distance bound, for instance).
using EpisodeStartHook = std::function<double()>;

// One self-contained environment instance with its own RNG stream.
class SwarmEnv {
 public:
  SwarmEnv(SwimmerInit init, PhysicsConfig physics, TargetSampler sampler, std::uint64_t seed,
           EpisodeStartHook on_start = {});

  void reset();
  StepOutcome step(double theta_m);

  const SwarmState& state() const noexcept { return state_; }
  const TargetSpec& target() const noexcept { return target_; }
  const SwimmerInit& init() const noexcept { return init_; }
  const PhysicsConfig& physics() const noexcept { return physics_; }
  long episodes_started() const noexcept { return episodes_started_; }
  // NaN unless an episode-start hook is installed.
  double episode_tag() const noexcept { return episode_tag_; }

  // Checkpoint support.
  Rng& rng() noexcept { return rng_; }
  const Rng& rng() const noexcept { return rng_; }
  void restore(SwarmState state, TargetSpec target, long episodes_started, double episode_tag);

 private:
  SwimmerInit init_;
  PhysicsConfig physics_;
  TargetSampler sampler_;
  EpisodeStartHook on_start_;
  Rng rng_;
  SwarmState state_;
  TargetSpec target_;
  long episodes_started_ = 0;
  double episode_tag_ = 0.0;
};

}  // namespace swarmnav::dynamics
