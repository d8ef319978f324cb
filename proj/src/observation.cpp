#include "swarmnav/observation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "swarmnav/errors.hpp"

namespace swarmnav::obs {

std::string_view to_string(EncodingMode mode) noexcept {
  switch (mode) {
    case EncodingMode::FullState:
      return "full_state";
    case EncodingMode::PositionsOnly:
      return "positions_only";
    case EncodingMode::MeanPose:
      return "mean_pose";
    case EncodingMode::MeanPoseUnabsorbed:
      return "mean_pose_unabsorbed";
    case EncodingMode::FullStatePlusTargetBearing:
      return "full_state_bearing";
  }
  return "full_state";
}

EncodingMode encoding_from_string(std::string_view name) {
  for (auto m : {EncodingMode::FullState, EncodingMode::PositionsOnly, EncodingMode::MeanPose,
                 EncodingMode::MeanPoseUnabsorbed, EncodingMode::FullStatePlusTargetBearing}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown encoding '" + std::string(name) + "'");
}

std::size_t observation_dim(EncodingMode mode, std::size_t n) noexcept {
  switch (mode) {
    case EncodingMode::FullState:
      return 3 * n + 3;
    case EncodingMode::PositionsOnly:
      return 2 * n + 3;
    case EncodingMode::MeanPose:
    case EncodingMode::MeanPoseUnabsorbed:
      return 6;
    case EncodingMode::FullStatePlusTargetBearing:
      return 3 * n + 4;
  }
  return 0;
}

namespace {

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

Pose mean_pose(const dynamics::SwarmState& s, bool unabsorbed_only, bool circular) {
  double sx = 0.0, sy = 0.0, st = 0.0, sc = 0.0, ss = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (unabsorbed_only && s.absorbed[i]) continue;
    const double th = dynamics::wrap_angle(s.thetas[i]);
    sx += s.xs[i];
    sy += s.ys[i];
    st += th;
    sc += std::cos(th);
    ss += std::sin(th);
    ++k;
  }
  if (k == 0) return mean_pose(s, false, circular);
  const double kn = static_cast<double>(k);
  Pose p{sx / kn, sy / kn, st / kn};
  if (circular) p.theta = dynamics::wrap_angle(std::atan2(ss, sc));
  return p;
}

}  // namespace

void encode_into(const dynamics::SwarmState& s, const dynamics::TargetSpec& target,
                 const EncoderOptions& opts, std::span<double> out) {
  const std::size_t n = s.size();
  if (out.size() != observation_dim(opts.mode, n)) throw DimensionError("observation buffer has wrong size");
  std::size_t k = 0;
  switch (opts.mode) {
    case EncodingMode::FullState:
    case EncodingMode::FullStatePlusTargetBearing:
      for (std::size_t i = 0; i < n; ++i) {
        out[k++] = s.xs[i];
        out[k++] = s.ys[i];
        out[k++] = s.thetas[i];
      }
      break;
    case EncodingMode::PositionsOnly:
      for (std::size_t i = 0; i < n; ++i) {
        out[k++] = s.xs[i];
        out[k++] = s.ys[i];
      }
      break;
    case EncodingMode::MeanPose:
    case EncodingMode::MeanPoseUnabsorbed: {
      const Pose p = mean_pose(s, opts.mode == EncodingMode::MeanPoseUnabsorbed, opts.circular_mean);
      out[k++] = p.x;
      out[k++] = p.y;
      out[k++] = p.theta;
      break;
    }
  }
  out[k++] = target.center.x;
  out[k++] = target.center.y;
  out[k++] = target.radius;
  if (opts.mode == EncodingMode::FullStatePlusTargetBearing) {
    const Vec2 m = s.mean_position();
    out[k++] = std::atan2(target.center.y - m.y, target.center.x - m.x);
  }
}

std::vector<double> encode(const dynamics::SwarmState& s, const dynamics::TargetSpec& target,
                           const EncoderOptions& opts) {
  std::vector<double> out(observation_dim(opts.mode, s.size()));
  encode_into(s, target, opts, out);
  return out;
}

RunningNormalizer::RunningNormalizer(std::size_t dim) : mean_(dim, 0.0), var_(dim, 1.0) {}

void RunningNormalizer::update(std::span<const double> rows, std::size_t batch_size) {
  const std::size_t d = dim();
  if (batch_size == 0 || rows.size() != d * batch_size) throw DimensionError("normalizer update size mismatch");
  const double bc = static_cast<double>(batch_size);
  const double total = count_ + bc;
  for (std::size_t c = 0; c < d; ++c) {
    double bm = 0.0;
    for (std::size_t r = 0; r < batch_size; ++r) bm += rows[r * d + c];
    bm /= bc;
    double bv = 0.0;
    for (std::size_t r = 0; r < batch_size; ++r) {
      const double e = rows[r * d + c] - bm;
      bv += e * e;
    }
    bv /= bc;
    const double delta = bm - mean_[c];
    const double m2 = var_[c] * count_ + bv * bc + delta * delta * count_ * bc / total;
    mean_[c] += delta * bc / total;
    var_[c] = m2 / total;
  }
  count_ = total;
}

void RunningNormalizer::apply(std::span<double> x) const {
  if (x.size() != dim()) throw DimensionError("normalizer input has wrong dimension");
  for (std::size_t c = 0; c < x.size(); ++c) {
    x[c] = std::clamp((x[c] - mean_[c]) / std::sqrt(var_[c] + kNormEpsilon), -kNormClip, kNormClip);
  }
}

std::vector<double> RunningNormalizer::normalize(std::span<const double> x, bool update_stats) {
  if (x.size() != dim()) throw DimensionError("normalizer input has wrong dimension");
  if (update_stats) update(x, 1);
  std::vector<double> out(x.begin(), x.end());
  apply(out);
  return out;
}

void RunningNormalizer::restore(std::vector<double> mean, std::vector<double> variance, double count) {
  if (mean.size() != variance.size()) throw DimensionError("normalizer mean/variance size mismatch");
  mean_ = std::move(mean);
  var_ = std::move(variance);
  count_ = count;
}

}  // namespace swarmnav::obs
