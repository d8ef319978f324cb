#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "swarmnav/swarm_dynamics.hpp"

namespace swarmnav::obs {

enum class EncodingMode {
  FullState,                   // (x_i, y_i, theta_i)... then (x_t, y_t, r_t)
  PositionsOnly,               // (x_i, y_i)... then target
  MeanPose,                    // (mean x, mean y, mean theta) then target
  MeanPoseUnabsorbed,          // same, averaged over swimmers still outside the target
  FullStatePlusTargetBearing,  // FullState then bearing from swarm mean to target
};

std::string_view to_string(EncodingMode mode) noexcept;
EncodingMode encoding_from_string(std::string_view name);

struct EncoderOptions {
  EncodingMode mode = EncodingMode::FullState;
  // Mean heading via atan2 of summed unit vectors instead of the arithmetic
  // mean of [0, 2pi) angles.
  bool circular_mean = false;
};

std::size_t observation_dim(EncodingMode mode, std::size_t swimmers) noexcept;

std::vector<double> encode(const dynamics::SwarmState& state, const dynamics::TargetSpec& target,
                           const EncoderOptions& opts);
// Writes into a preallocated buffer of observation_dim(...) entries.
void encode_into(const dynamics::SwarmState& state, const dynamics::TargetSpec& target,
                 const EncoderOptions& opts, std::span<double> out);

inline constexpr double kNormEpsilon = 1e-8;
inline constexpr double kNormClip = 10.0;

// Streaming per-component mean and (population) variance, combined batch by
// batch with the parallel-moments rule.
class RunningNormalizer {
 public:
  RunningNormalizer() = default;
  explicit RunningNormalizer(std::size_t dim);

  std::size_t dim() const noexcept { return mean_.size(); }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& variance() const noexcept { return var_; }
  double count() const noexcept { return count_; }

  // rows: batch_size consecutive vectors of length dim().
  void update(std::span<const double> rows, std::size_t batch_size);
  void update(std::span<const double> row) { update(row, 1); }

  // clip((x - mean) / sqrt(var + eps), -clip, clip), in place.
  void apply(std::span<double> x) const;

  // normalize(obs, update): optional statistics update, then transform.
  std::vector<double> normalize(std::span<const double> x, bool update_stats);

  void restore(std::vector<double> mean, std::vector<double> variance, double count);

  friend bool operator==(const RunningNormalizer&, const RunningNormalizer&) = default;

 private:
  std::vector<double> mean_;
  std::vector<double> var_;
  double count_ = 0.0;
};

}  // namespace swarmnav::obs
