#include "swarmnav/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "swarmnav/errors.hpp"

namespace swarmnav::harness {
namespace {

constexpr char kMagic[8] = {'S', 'W', 'N', 'V', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double d : v) f64(d);
  }
  void bytes(const std::vector<std::uint8_t>& v) {
    u64(v.size());
    out_.insert(out_.end(), v.begin(), v.end());
  }
  std::vector<std::uint8_t> finish() {
    u64(fnv1a(out_.data(), out_.size()));
    return std::move(out_);
  }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t n) : data_(data), n_(n) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = count(1);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const auto n = count(8);
    std::vector<double> v(n);
    for (auto& d : v) d = f64();
    return v;
  }
  std::vector<std::uint8_t> bytes() {
    const auto n = count(1);
    std::vector<std::uint8_t> v(data_ + pos_, data_ + pos_ + n);
    pos_ += n;
    return v;
  }
  std::size_t position() const noexcept { return pos_; }

 private:
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw CheckpointError("checkpoint is truncated");
  }
  std::size_t count(std::size_t elem) {
    const std::uint64_t n = u64();
    if (n > (n_ - pos_) / elem) throw CheckpointError("checkpoint is truncated");
    return static_cast<std::size_t>(n);
  }

  const std::uint8_t* data_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_string(const std::string& s) {
  std::istringstream is(s);
  Rng rng;
  is >> rng;
  if (!is) throw CheckpointError("malformed RNG state");
  return rng;
}

Checkpoint capture(const rl::Trainer& trainer, std::string config_text, long curriculum_counter) {
  Checkpoint c;
  c.config_text = std::move(config_text);
  c.obs_dim = trainer.obs_dim();
  c.encoding = trainer.encoder().mode;
  c.hidden_dims = trainer.policy().hidden_dims();
  c.params.assign(trainer.policy().params().begin(), trainer.policy().params().end());
  c.adam_m = trainer.adam().first_moment();
  c.adam_v = trainer.adam().second_moment();
  c.adam_t = trainer.adam().timestep();
  c.obs_norm = trainer.normalizer();
  c.reward_norm = trainer.reward_scaler().stats;
  c.reward_returns = trainer.reward_scaler().running_returns;
  c.next_obs = trainer.next_obs();
  c.global_step = trainer.global_step();
  c.update_index = trainer.update_index();
  c.episodes_completed = trainer.episodes_completed();
  c.action_rng = rng_to_string(trainer.action_rng());
  c.shuffle_rng = rng_to_string(trainer.shuffle_rng());
  c.perturb_rng = rng_to_string(trainer.perturb_rng());
  c.curriculum_counter = curriculum_counter;
  for (const auto& env : trainer.envs()) {
    c.envs.push_back({rng_to_string(env.rng()), env.episodes_started(), env.episode_tag(), env.target(), env.state()});
  }
  return c;
}

void restore(rl::Trainer& trainer, const Checkpoint& c) {
  if (c.obs_dim != trainer.obs_dim() || c.encoding != trainer.encoder().mode) {
    throw DimensionError("checkpoint observation dimension " + std::to_string(c.obs_dim) +
                         " does not match the environment's " + std::to_string(trainer.obs_dim()));
  }
  if (c.hidden_dims != trainer.policy().hidden_dims() || c.params.size() != trainer.policy().params().size()) {
    throw DimensionError("checkpoint network shape does not match");
  }
  if (c.envs.size() != trainer.envs().size()) throw DimensionError("checkpoint environment count does not match");
  trainer.policy().assign(c.params);
  trainer.adam().restore(c.adam_m, c.adam_v, c.adam_t);
  if (c.obs_norm.dim() != trainer.obs_dim()) throw DimensionError("checkpoint normalizer dimension mismatch");
  trainer.normalizer() = c.obs_norm;
  trainer.reward_scaler().stats = c.reward_norm;
  trainer.reward_scaler().running_returns = c.reward_returns;
  trainer.action_rng() = rng_from_string(c.action_rng);
  trainer.shuffle_rng() = rng_from_string(c.shuffle_rng);
  trainer.perturb_rng() = rng_from_string(c.perturb_rng);
  for (std::size_t e = 0; e < c.envs.size(); ++e) {
    auto& env = trainer.envs()[e];
    const auto& s = c.envs[e];
    env.restore(s.state, s.target, s.episodes_started, s.episode_tag);
    env.rng() = rng_from_string(s.rng);
  }
  trainer.restore_progress(c.next_obs, c.global_step, c.update_index, c.episodes_completed);
}

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  Writer w;
  for (char ch : kMagic) w.u8(static_cast<std::uint8_t>(ch));
  w.u32(kCheckpointVersion);
  w.str(c.config_text);
  w.u64(c.obs_dim);
  w.u32(static_cast<std::uint32_t>(c.encoding));
  w.u64(c.hidden_dims.size());
  for (auto h : c.hidden_dims) w.u64(h);
  w.doubles(c.params);
  w.doubles(c.adam_m);
  w.doubles(c.adam_v);
  w.i64(c.adam_t);
  w.doubles(c.obs_norm.mean());
  w.doubles(c.obs_norm.variance());
  w.f64(c.obs_norm.count());
  w.doubles(c.reward_norm.mean());
  w.doubles(c.reward_norm.variance());
  w.f64(c.reward_norm.count());
  w.doubles(c.reward_returns);
  w.doubles(c.next_obs);
  w.i64(c.global_step);
  w.i32(c.update_index);
  w.i64(c.episodes_completed);
  w.str(c.action_rng);
  w.str(c.shuffle_rng);
  w.str(c.perturb_rng);
  w.i64(c.curriculum_counter);
  w.u64(c.envs.size());
  for (const auto& e : c.envs) {
    w.str(e.rng);
    w.i64(e.episodes_started);
    w.f64(e.episode_tag);
    w.f64(e.target.center.x);
    w.f64(e.target.center.y);
    w.f64(e.target.radius);
    w.doubles(e.state.xs);
    w.doubles(e.state.ys);
    w.doubles(e.state.thetas);
    w.bytes(e.state.absorbed);
    w.i32(e.state.step_count);
    w.i64(e.state.episode_index);
    w.u8(e.state.terminated ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(e.state.reason));
  }
  return w.finish();
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  Reader r(bytes.data(), bytes.size() - 8);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8();
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  Reader tail(bytes.data() + bytes.size() - 8, 8);
  if (tail.u64() != fnv1a(bytes.data(), bytes.size() - 8)) throw CheckpointError("checkpoint hash mismatch (corrupt file)");

  Checkpoint c;
  c.config_text = r.str();
  c.obs_dim = r.u64();
  const auto enc = r.u32();
  if (enc > static_cast<std::uint32_t>(obs::EncodingMode::FullStatePlusTargetBearing)) {
    throw CheckpointError("unknown encoding in checkpoint");
  }
  c.encoding = static_cast<obs::EncodingMode>(enc);
  const auto nh = r.u64();
  if (nh > 64) throw CheckpointError("implausible hidden layer count");
  for (std::uint64_t i = 0; i < nh; ++i) c.hidden_dims.push_back(r.u64());
  c.params = r.doubles();
  c.adam_m = r.doubles();
  c.adam_v = r.doubles();
  c.adam_t = r.i64();
  {
    auto mean = r.doubles();
    auto var = r.doubles();
    c.obs_norm.restore(std::move(mean), std::move(var), r.f64());
  }
  {
    auto mean = r.doubles();
    auto var = r.doubles();
    c.reward_norm.restore(std::move(mean), std::move(var), r.f64());
  }
  c.reward_returns = r.doubles();
  c.next_obs = r.doubles();
  c.global_step = r.i64();
  c.update_index = r.i32();
  c.episodes_completed = r.i64();
  c.action_rng = r.str();
  c.shuffle_rng = r.str();
  c.perturb_rng = r.str();
  c.curriculum_counter = r.i64();
  const auto ne = r.u64();
  if (ne > 1024) throw CheckpointError("implausible environment count");
  for (std::uint64_t i = 0; i < ne; ++i) {
    EnvSnapshot e;
    e.rng = r.str();
    e.episodes_started = r.i64();
    e.episode_tag = r.f64();
    e.target.center.x = r.f64();
    e.target.center.y = r.f64();
    e.target.radius = r.f64();
    e.state.xs = r.doubles();
    e.state.ys = r.doubles();
    e.state.thetas = r.doubles();
    e.state.absorbed = r.bytes();
    e.state.step_count = r.i32();
    e.state.episode_index = r.i64();
    e.state.terminated = r.u8() != 0;
    const auto reason = r.u8();
    if (reason > static_cast<std::uint8_t>(dynamics::TerminationReason::DriftedAway)) {
      throw CheckpointError("unknown termination reason in checkpoint");
    }
    e.state.reason = static_cast<dynamics::TerminationReason>(reason);
    const auto n = e.state.xs.size();
    if (e.state.ys.size() != n || e.state.thetas.size() != n || e.state.absorbed.size() != n) {
      throw CheckpointError("inconsistent swarm arrays in checkpoint");
    }
    c.envs.push_back(std::move(e));
  }
  if (r.position() != bytes.size() - 8) throw CheckpointError("trailing bytes in checkpoint");
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write on checkpoint '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace swarmnav::harness
