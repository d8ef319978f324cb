#pragma once

// Flat key = value experiment configuration. Every key, with its default, is
// listed in configs/defaults.cfg; experiment ids pick the observation
// encoding and the target sampler.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "swarmnav/curriculum.hpp"
#include "swarmnav/observation.hpp"
#include "swarmnav/ppo.hpp"
#include "swarmnav/swarm_dynamics.hpp"

namespace swarmnav::harness {

enum class TargetMode { Fixed, Random, Curriculum };

struct ExperimentInfo {
  std::string_view id;
  obs::EncodingMode encoding;
  TargetMode target_mode;
  int default_num_envs;
  std::string_view description;
};

// The seven environment variants.
const std::vector<ExperimentInfo>& experiments();
const ExperimentInfo& experiment_info(std::string_view id);

// Target used by every fixed-target experiment.
inline constexpr dynamics::TargetSpec kFixedTarget{{10.56, 41.63}, 9.36};

struct ExperimentConfig {
  std::string experiment = "env-0";
  int n_swimmers = 4;
  std::uint64_t seed = 1;
  std::string output_dir;  // empty: runs/<experiment>_<algo>_n<N>_s<seed>

  rl::TrainConfig train;
  dynamics::PhysicsConfig physics;
  double spacing = 6.0;

  dynamics::TargetSpec fixed_target = kFixedTarget;
  std::string target_sampling = "square";  // square | disc, for random-target runs
  double target_range = 100.0;
  double radius_min = 5.0;
  double radius_max = 20.0;
  curriculum::CurriculumSpec curriculum;

  bool circular_mean = false;
  int smoothing_window = 100;
  int eval_episodes = 100;
  int checkpoint_interval = 0;  // updates between checkpoints; 0 = final only

  const ExperimentInfo& info() const { return experiment_info(experiment); }
  obs::EncoderOptions encoder() const { return {info().encoding, circular_mean}; }
  dynamics::SwimmerInit swimmer_init() const;
  std::string run_name() const;
  void validate() const;
};

// Defaults that depend on the experiment id and swimmer count.
void apply_experiment_defaults(ExperimentConfig& cfg);

// Sets one key; throws ConfigError for unknown keys or unparsable values.
void set_key(ExperimentConfig& cfg, std::string_view key, std::string_view value);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(std::string_view text);
// Splits "key=value".
std::pair<std::string, std::string> parse_override(std::string_view kv);

// experiment and n_swimmers are applied first, then their defaults, then the
// remaining keys in order, then overrides.
ExperimentConfig build_config(const KeyValues& file, const KeyValues& overrides = {});
ExperimentConfig load_config(const std::string& path, const KeyValues& overrides = {});

// Canonical text form; build_config(parse_key_values(to_text(c))) == c.
std::string to_text(const ExperimentConfig& cfg);

// Names of every recognised key, in to_text order.
std::vector<std::string> config_keys();

}  // namespace swarmnav::harness
