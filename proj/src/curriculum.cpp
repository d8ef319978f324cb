#include "swarmnav/curriculum.hpp"

#include <cmath>

#include "swarmnav/errors.hpp"

namespace swarmnav::curriculum {

void CurriculumSpec::validate() const {
  if (!(start_distance > 0.0) || !(final_distance >= start_distance)) {
    throw ConfigError("curriculum requires 0 < start distance <= final distance");
  }
  if (!(decay_episodes > 0.0)) throw ConfigError("curriculum decay must be positive");
}

double max_distance(double episode, const CurriculumSpec& spec) noexcept {
  return spec.final_distance - (spec.final_distance - spec.start_distance) * std::exp(-episode / spec.decay_episodes);
}

CurriculumSchedule::CurriculumSchedule(CurriculumSpec spec, double radius_min, double radius_max)
    : spec_(spec), radius_min_(radius_min), radius_max_(radius_max) {
  spec_.validate();
  if (!(radius_min_ > 0.0) || radius_max_ < radius_min_) throw ConfigError("invalid curriculum radius range");
}

dynamics::TargetSpec CurriculumSchedule::draw(Rng& rng, Vec2 swarm_mean) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> radius(radius_min_, radius_max_);
  const double d = current_max_distance() * std::sqrt(unit(rng));
  const double phi = kTwoPi * unit(rng);
  dynamics::TargetSpec t;
  t.center = {swarm_mean.x + d * std::cos(phi), swarm_mean.y + d * std::sin(phi)};
  t.radius = radius(rng);
  return t;
}

double CurriculumSchedule::commit_episode() noexcept {
  const double d = current_max_distance();
  ++counter_;
  return d;
}

dynamics::TargetSpec CurriculumSchedule::sample(Rng& rng, Vec2 swarm_mean) {
  auto t = draw(rng, swarm_mean);
  commit_episode();
  return t;
}

dynamics::TargetSampler curriculum_sampler(std::shared_ptr<CurriculumSchedule> schedule) {
  return [schedule = std::move(schedule)](Rng& rng, Vec2 mean) { return schedule->draw(rng, mean); };
}

}  // namespace swarmnav::curriculum
