#pragma once

// Target-distance curriculum: the maximum distance between the initial swarm
// mean and the target centre relaxes exponentially from a starting value to
// a final value as episodes accumulate,
//   d(e) = d_final - (d_final - d_start) * exp(-e / decay).

#include <memory>

#include "swarmnav/common.hpp"
#include "swarmnav/swarm_dynamics.hpp"

namespace swarmnav::curriculum {

struct CurriculumSpec {
  double start_distance = 20.0;   // um
  double final_distance = 100.0;  // um
  double decay_episodes = 1000.0;

  void validate() const;
};

double max_distance(double episode, const CurriculumSpec& spec) noexcept;

// Shared across every environment of a run; one counter for all of them.
// Not thread-safe; the trainer resets environments from a single thread.
class CurriculumSchedule {
 public:
  explicit CurriculumSchedule(CurriculumSpec spec, double radius_min = 5.0, double radius_max = 20.0);

  const CurriculumSpec& spec() const noexcept { return spec_; }
  long episode_counter() const noexcept { return counter_; }
  double current_max_distance() const noexcept { return max_distance(static_cast<double>(counter_), spec_); }

  // Draws a target for the current episode number without advancing it.
  dynamics::TargetSpec draw(Rng& rng, Vec2 swarm_mean) const;
  // Marks one episode start; returns the distance bound that was in force.
  double commit_episode() noexcept;

  // draw() followed by commit_episode().
  dynamics::TargetSpec sample(Rng& rng, Vec2 swarm_mean);

  void restore(long counter) noexcept { counter_ = counter; }

 private:
  CurriculumSpec spec_;
  double radius_min_;
  double radius_max_;
  long counter_ = 0;
};

// Sampler for SwarmEnv: draws under the current bound. Pair it with
// commit_episode() as the environment's episode-start hook.
dynamics::TargetSampler curriculum_sampler(std::shared_ptr<CurriculumSchedule> schedule);

}  // namespace swarmnav::curriculum
