#include "swarmnav/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "swarmnav/errors.hpp"

namespace swarmnav::harness {

const std::vector<ExperimentInfo>& experiments() {
  using obs::EncodingMode;
  static const std::vector<ExperimentInfo> table{
      {"env-0", EncodingMode::FullState, TargetMode::Fixed, 1, "fixed target, full swarm state"},
      {"env-1a", EncodingMode::PositionsOnly, TargetMode::Fixed, 1, "fixed target, positions without headings"},
      {"env-1b", EncodingMode::MeanPose, TargetMode::Fixed, 1, "fixed target, swarm mean position and heading"},
      {"env-1c", EncodingMode::MeanPoseUnabsorbed, TargetMode::Fixed, 1,
       "fixed target, mean pose of swimmers not yet absorbed"},
      {"env-2", EncodingMode::FullState, TargetMode::Random, 1, "random target position and size, full state"},
      {"env-2-om", EncodingMode::FullStatePlusTargetBearing, TargetMode::Random, 4,
       "random target, full state plus target bearing, 4 parallel envs"},
      {"env-2-omc", EncodingMode::FullStatePlusTargetBearing, TargetMode::Curriculum, 2,
       "env-2-om with a target-distance curriculum, 2 parallel envs"},
  };
  return table;
}

const ExperimentInfo& experiment_info(std::string_view id) {
  for (const auto& e : experiments()) {
    if (e.id == id) return e;
  }
  throw ConfigError("unknown experiment '" + std::string(id) + "'");
}

dynamics::SwimmerInit ExperimentConfig::swimmer_init() const {
  dynamics::SwimmerInit init;
  int side = 0;
  while (side * side < n_swimmers) ++side;
  init.grid_side = side;
  init.spacing = spacing;
  return init;
}

std::string ExperimentConfig::run_name() const {
  return experiment + "_" + std::string(rl::to_string(train.algo)) + "_n" + std::to_string(n_swimmers) + "_s" +
         std::to_string(seed);
}

void ExperimentConfig::validate() const {
  experiment_info(experiment);
  const auto init = swimmer_init();
  if (init.swimmer_count() != n_swimmers) throw ConfigError("n_swimmers must be a perfect square");
  init.validate();
  physics.validate();
  train.validate();
  if (target_sampling != "square" && target_sampling != "disc") {
    throw ConfigError("target_sampling must be 'square' or 'disc'");
  }
  if (!(radius_min > 0.0) || radius_max < radius_min) throw ConfigError("invalid target radius range");
  if (!(target_range > 0.0)) throw ConfigError("target_range must be positive");
  if (!(fixed_target.radius > 0.0)) throw ConfigError("fixed target radius must be positive");
  curriculum.validate();
  if (smoothing_window < 1) throw ConfigError("smoothing_window must be at least 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be at least 1");
  if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be non-negative");
}

void apply_experiment_defaults(ExperimentConfig& cfg) {
  const auto& info = cfg.info();
  cfg.train.num_envs = info.default_num_envs;
  if (info.target_mode == TargetMode::Curriculum) {
    cfg.curriculum.decay_episodes = cfg.n_swimmers >= 25 ? 2000.0 : 1000.0;
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

double to_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double d = std::stod(s, &used);
    if (used != s.size()) bad_value(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out{};
  // Accept 1e6 style literals for counts.
  if (v.find_first_of("eE.") != std::string_view::npos) {
    const double d = to_double(key, v);
    out = static_cast<Int>(d);
    if (static_cast<double>(out) != d) bad_value(key, v);
    return out;
  }
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v);
}

std::vector<std::size_t> to_dims(std::string_view key, std::string_view v) {
  std::vector<std::size_t> dims;
  while (!v.empty()) {
    const auto comma = v.find(',');
    dims.push_back(to_int<std::size_t>(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (dims.empty()) bad_value(key, v);
  return dims;
}

struct KeyDef {
  std::string_view name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define SWARMNAV_DOUBLE_KEY(name, field)                                                          \
  KeyDef {                                                                                        \
    name, [](ExperimentConfig& c, std::string_view v) { c.field = to_double(name, v); },          \
        [](const ExperimentConfig& c) { return fmt_double(c.field); }                             \
  }
#define SWARMNAV_INT_KEY(name, field, type)                                                       \
  KeyDef {                                                                                        \
    name, [](ExperimentConfig& c, std::string_view v) { c.field = to_int<type>(name, v); },       \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                         \
  }
#define SWARMNAV_BOOL_KEY(name, field)                                                            \
  KeyDef {                                                                                        \
    name, [](ExperimentConfig& c, std::string_view v) { c.field = to_bool(name, v); },            \
        [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }         \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> keys{
      {"experiment", [](ExperimentConfig& c, std::string_view v) { c.experiment = std::string(v); },
       [](const ExperimentConfig& c) { return c.experiment; }},
      SWARMNAV_INT_KEY("n_swimmers", n_swimmers, int),
      {"algo", [](ExperimentConfig& c, std::string_view v) { c.train.algo = rl::algo_from_string(v); },
       [](const ExperimentConfig& c) { return std::string(rl::to_string(c.train.algo)); }},
      SWARMNAV_INT_KEY("seed", seed, std::uint64_t),
      {"output_dir", [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); },
       [](const ExperimentConfig& c) { return c.output_dir; }},
      // training
      SWARMNAV_INT_KEY("total_timesteps", train.total_timesteps, long),
      SWARMNAV_INT_KEY("num_envs", train.num_envs, int),
      SWARMNAV_INT_KEY("rollout_horizon", train.rollout_horizon, int),
      SWARMNAV_INT_KEY("minibatches", train.minibatches, int),
      SWARMNAV_INT_KEY("update_epochs", train.update_epochs, int),
      SWARMNAV_DOUBLE_KEY("lr", train.lr),
      SWARMNAV_BOOL_KEY("anneal_lr", train.anneal_lr),
      SWARMNAV_DOUBLE_KEY("gamma", train.gamma),
      SWARMNAV_DOUBLE_KEY("gae_lambda", train.gae_lambda),
      SWARMNAV_DOUBLE_KEY("clip_coef", train.clip_coef),
      SWARMNAV_BOOL_KEY("clip_value_loss", train.clip_value_loss),
      SWARMNAV_BOOL_KEY("normalize_advantages", train.normalize_advantages),
      SWARMNAV_DOUBLE_KEY("entropy_coef", train.entropy_coef),
      SWARMNAV_DOUBLE_KEY("value_coef", train.value_coef),
      SWARMNAV_DOUBLE_KEY("max_grad_norm", train.max_grad_norm),
      SWARMNAV_DOUBLE_KEY("rpo_alpha", train.rpo_alpha),
      SWARMNAV_DOUBLE_KEY("action_low", train.action_low),
      SWARMNAV_DOUBLE_KEY("action_high", train.action_high),
      SWARMNAV_DOUBLE_KEY("adam_eps", train.adam_eps),
      SWARMNAV_BOOL_KEY("normalize_reward", train.normalize_reward),
      SWARMNAV_BOOL_KEY("bootstrap_truncation", train.bootstrap_truncation),
      {"hidden_dims", [](ExperimentConfig& c, std::string_view v) { c.train.hidden_dims = to_dims("hidden_dims", v); },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.train.hidden_dims.size(); ++i) {
           if (i) s += ",";
           s += std::to_string(c.train.hidden_dims[i]);
         }
         return s;
       }},
      // physics
      SWARMNAV_DOUBLE_KEY("velocity", physics.velocity),
      SWARMNAV_DOUBLE_KEY("dt", physics.dt),
      SWARMNAV_DOUBLE_KEY("hydro_coupling", physics.hydro_coupling),
      SWARMNAV_DOUBLE_KEY("hydro_cap", physics.hydro_cap),
      SWARMNAV_DOUBLE_KEY("hydro_phase_offset", physics.hydro_phase_offset),
      SWARMNAV_INT_KEY("max_steps", physics.max_steps, int),
      SWARMNAV_DOUBLE_KEY("abort_distance", physics.abort_distance),
      SWARMNAV_DOUBLE_KEY("spacing", spacing),
      // targets
      SWARMNAV_DOUBLE_KEY("target_x", fixed_target.center.x),
      SWARMNAV_DOUBLE_KEY("target_y", fixed_target.center.y),
      SWARMNAV_DOUBLE_KEY("target_r", fixed_target.radius),
      {"target_sampling", [](ExperimentConfig& c, std::string_view v) { c.target_sampling = std::string(v); },
       [](const ExperimentConfig& c) { return c.target_sampling; }},
      SWARMNAV_DOUBLE_KEY("target_range", target_range),
      SWARMNAV_DOUBLE_KEY("radius_min", radius_min),
      SWARMNAV_DOUBLE_KEY("radius_max", radius_max),
      SWARMNAV_DOUBLE_KEY("curriculum_start", curriculum.start_distance),
      SWARMNAV_DOUBLE_KEY("curriculum_final", curriculum.final_distance),
      SWARMNAV_DOUBLE_KEY("curriculum_decay", curriculum.decay_episodes),
      // observation and harness
      SWARMNAV_BOOL_KEY("circular_mean", circular_mean),
      SWARMNAV_INT_KEY("smoothing_window", smoothing_window, int),
      SWARMNAV_INT_KEY("eval_episodes", eval_episodes, int),
      SWARMNAV_INT_KEY("checkpoint_interval", checkpoint_interval, int),
  };
  return keys;
}

#undef SWARMNAV_DOUBLE_KEY
#undef SWARMNAV_INT_KEY
#undef SWARMNAV_BOOL_KEY

}  // namespace

void set_key(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& k : key_table()) {
    if (k.name == key) {
      k.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

std::pair<std::string, std::string> parse_override(std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("override must look like key=value");
  return {std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1)))};
}

ExperimentConfig build_config(const KeyValues& file, const KeyValues& overrides) {
  ExperimentConfig cfg;
  // Identity keys first so the experiment defaults can be layered under the rest.
  for (const auto* src : {&file, &overrides}) {
    for (const auto& [k, v] : *src) {
      if (k == "experiment" || k == "n_swimmers") set_key(cfg, k, v);
    }
  }
  apply_experiment_defaults(cfg);
  for (const auto* src : {&file, &overrides}) {
    for (const auto& [k, v] : *src) set_key(cfg, k, v);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const KeyValues& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return build_config(parse_key_values(ss.str()), overrides);
}

std::string to_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : key_table()) {
    out += k.name;
    out += " = ";
    out += k.get(cfg);
    out += '\n';
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> names;
  for (const auto& k : key_table()) names.emplace_back(k.name);
  return names;
}

}  // namespace swarmnav::harness
