#pragma once

// Versioned binary snapshot of a training run between two updates: policy,
// optimiser, normalisers, RNG streams and every environment mid-episode, so
// that a resumed run continues step for step.
//
// Layout (all integers and doubles little-endian; doubles as IEEE-754 bits):
//   bytes[8]  magic "SWNVCKPT"
//   u32       format version (kCheckpointVersion)
//   str       config text (u64 length + bytes), see to_text()
//   u64       observation dimension
//   u32       encoding mode
//   vec<u64>  hidden layer widths
//   vec<f64>  policy parameters [actor | log_std | critic]
//   vec<f64>  Adam first moment, vec<f64> second moment, i64 timestep
//   vec<f64>  observation mean, vec<f64> variance, f64 count
//   vec<f64>  reward-scale mean, vec<f64> variance, f64 count, vec<f64> running returns
//   vec<f64>  normalised next observations (num_envs x obs_dim)
//   i64 global step, i32 updates done, i64 episodes completed
//   str x3    action, shuffle and perturbation RNG states (std::mt19937_64 text form)
//   i64       curriculum episode counter (-1 without curriculum)
//   u64       environment count, then per environment:
//               str rng, i64 episodes started, f64 episode tag,
//               f64 x3 target (x, y, r),
//               vec<f64> xs, ys, thetas, vec<u8> absorbed,
//               i32 step count, i64 episode index, u8 terminated, u8 reason
//   u64       FNV-1a 64 hash of every preceding byte
// vec<T> is a u64 element count followed by the elements.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "swarmnav/observation.hpp"
#include "swarmnav/ppo.hpp"
#include "swarmnav/swarm_dynamics.hpp"

namespace swarmnav::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct EnvSnapshot {
  std::string rng;
  long episodes_started = 0;
  double episode_tag = 0.0;
  dynamics::TargetSpec target;
  dynamics::SwarmState state;
};

struct Checkpoint {
  std::string config_text;
  std::size_t obs_dim = 0;
  obs::EncodingMode encoding = obs::EncodingMode::FullState;
  std::vector<std::size_t> hidden_dims;
  std::vector<double> params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t adam_t = 0;
  obs::RunningNormalizer obs_norm;
  obs::RunningNormalizer reward_norm;
  std::vector<double> reward_returns;
  std::vector<double> next_obs;
  long global_step = 0;
  int update_index = 0;
  long episodes_completed = 0;
  std::string action_rng;
  std::string shuffle_rng;
  std::string perturb_rng;
  long curriculum_counter = -1;
  std::vector<EnvSnapshot> envs;
};

std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& s);

Checkpoint capture(const rl::Trainer& trainer, std::string config_text, long curriculum_counter);
// Throws DimensionError when the trainer's shapes differ from the snapshot.
void restore(rl::Trainer& trainer, const Checkpoint& ckpt);

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
// Throws CheckpointError on bad magic, unsupported version, truncation or a
// hash mismatch.
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace swarmnav::harness
