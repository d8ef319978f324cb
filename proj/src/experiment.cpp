#include "swarmnav/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "swarmnav/errors.hpp"
#include "swarmnav/trajectory.hpp"

namespace swarmnav::harness {

dynamics::TargetSampler make_target_sampler(const ExperimentConfig& cfg,
                                            const std::shared_ptr<curriculum::CurriculumSchedule>& schedule) {
  switch (cfg.info().target_mode) {
    case TargetMode::Fixed:
      return dynamics::fixed_target(cfg.fixed_target);
    case TargetMode::Random:
      if (cfg.target_sampling == "disc") {
        return dynamics::uniform_disc_target(cfg.target_range, cfg.radius_min, cfg.radius_max);
      }
      return dynamics::uniform_square_target(cfg.target_range, cfg.radius_min, cfg.radius_max);
    case TargetMode::Curriculum:
      if (!schedule) throw ConfigError("curriculum experiment without a schedule");
      return curriculum::curriculum_sampler(schedule);
  }
  throw ConfigError("unhandled target mode");
}

dynamics::SwarmEnv make_env(const ExperimentConfig& cfg, const std::shared_ptr<curriculum::CurriculumSchedule>& schedule,
                            std::uint64_t seed) {
  dynamics::EpisodeStartHook hook;
  if (schedule) hook = [schedule] { return schedule->commit_episode(); };
  return dynamics::SwarmEnv(cfg.swimmer_init(), cfg.physics, make_target_sampler(cfg, schedule), seed, std::move(hook));
}

Run make_run(const ExperimentConfig& cfg) {
  cfg.validate();
  Run run;
  run.config = cfg;
  if (cfg.info().target_mode == TargetMode::Curriculum) {
    run.schedule = std::make_shared<curriculum::CurriculumSchedule>(cfg.curriculum, cfg.radius_min, cfg.radius_max);
  }
  std::vector<dynamics::SwarmEnv> envs;
  for (int e = 0; e < cfg.train.num_envs; ++e) {
    envs.push_back(make_env(cfg, run.schedule, rl::derive_seed(cfg.seed, kEnvSeedStream + static_cast<std::uint64_t>(e))));
  }
  run.trainer = std::make_unique<rl::Trainer>(cfg.train, std::move(envs), cfg.encoder(), cfg.seed);
  return run;
}

Checkpoint capture(const Run& run) {
  return harness::capture(*run.trainer, to_text(run.config), run.curriculum_counter());
}

Run resume_run(const Checkpoint& ckpt) {
  Run run = make_run(build_config(parse_key_values(ckpt.config_text)));
  restore(*run.trainer, ckpt);
  if (run.schedule) {
    if (ckpt.curriculum_counter < 0) throw CheckpointError("checkpoint lacks the curriculum counter");
    run.schedule->restore(ckpt.curriculum_counter);
  }
  return run;
}

double smoothed_return(std::span<const rl::EpisodeRecord> records, int window) {
  if (records.empty()) throw ContractViolation("smoothed_return needs at least one episode");
  if (window < 1) throw ContractViolation("smoothing window must be positive");
  const std::size_t k = std::min(records.size(), static_cast<std::size_t>(window));
  double s = 0.0;
  for (std::size_t i = records.size() - k; i < records.size(); ++i) s += records[i].episode_return;
  return s / static_cast<double>(k);
}

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string episode_csv_row(const rl::EpisodeRecord& r) {
  std::string s = std::to_string(r.global_step) + "," + std::to_string(r.episode) + "," +
                  std::to_string(r.episode_return) + "," + std::to_string(r.length) + "," +
                  std::string(dynamics::to_string(r.reason)) + ",";
  if (!std::isnan(r.curriculum_d)) s += g17(r.curriculum_d);
  return s;
}

std::string update_csv_row(const rl::UpdateDiagnostics& d) {
  return std::to_string(d.update) + "," + std::to_string(d.global_step) + "," + g17(d.lr) + "," + g17(d.policy_loss) +
         "," + g17(d.value_loss) + "," + g17(d.entropy) + "," + g17(d.approx_kl) + "," + g17(d.old_approx_kl) + "," +
         g17(d.clip_fraction) + "," + g17(d.explained_variance) + "," + g17(d.action_std) + "," + g17(d.grad_norm) +
         "," + std::to_string(d.skipped_steps);
}

std::filesystem::path output_root() {
  const char* root = std::getenv("SWARMNAV_OUTPUT_ROOT");
  return root && *root ? std::filesystem::path(root) : std::filesystem::current_path();
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::path p = cfg.output_dir.empty() ? std::filesystem::path("runs") / cfg.run_name()
                                                   : std::filesystem::path(cfg.output_dir);
  return p.is_absolute() ? p : output_root() / p;
}

TrainingResult run_training(const ExperimentConfig& cfg_in, const TrainingOptions& opts) {
  Run run;
  if (opts.resume_from) {
    run = resume_run(read_checkpoint(*opts.resume_from));
  } else {
    run = make_run(cfg_in);
  }
  const ExperimentConfig& cfg = run.config;
  rl::Trainer& trainer = *run.trainer;

  TrainingResult result;
  result.config = cfg;
  result.output_dir = resolve_output_dir(cfg);
  result.checkpoint_path = result.output_dir / "checkpoint.bin";

  std::ofstream episodes_csv;
  std::ofstream updates_csv;
  if (opts.write_files) {
    std::filesystem::create_directories(result.output_dir);
    const auto mode = opts.resume_from ? std::ios::app : std::ios::trunc;
    episodes_csv.open(result.output_dir / "episodes.csv", std::ios::out | mode);
    updates_csv.open(result.output_dir / "updates.csv", std::ios::out | mode);
    if (!episodes_csv || !updates_csv) throw ConfigError("cannot create logs in " + result.output_dir.string());
    if (!opts.resume_from) {
      episodes_csv << kEpisodeCsvHeader << '\n';
      updates_csv << kUpdateCsvHeader << '\n';
    }
    std::ofstream(result.output_dir / "config.cfg") << to_text(cfg);
  }

  trainer.on_episode = [&](const rl::EpisodeRecord& rec) {
    result.episodes.push_back(rec);
    if (episodes_csv.is_open()) episodes_csv << episode_csv_row(rec) << '\n';
  };

  auto stop = [&] { return trainer.finished() || (opts.max_updates > 0 && trainer.update_index() >= opts.max_updates); };
  while (!stop()) {
    rl::UpdateDiagnostics diag;
    try {
      diag = trainer.run_update();
    } catch (const NonFiniteError&) {
      if (opts.write_files) write_checkpoint(result.output_dir / "checkpoint_nan.bin", capture(run));
      throw;
    }
    result.updates.push_back(diag);
    if (updates_csv.is_open()) updates_csv << update_csv_row(diag) << '\n';
    if (opts.verbose) {
      const double sm = result.episodes.empty() ? std::nan("")
                                                : smoothed_return(result.episodes, cfg.smoothing_window);
      std::fprintf(stderr, "[%s] update %d/%d step %ld smoothed_return %.3f std %.3f\n", cfg.run_name().c_str(),
                   diag.update, cfg.train.num_updates(), diag.global_step, sm, diag.action_std);
    }
    if (opts.write_files && cfg.checkpoint_interval > 0 && diag.update % cfg.checkpoint_interval == 0) {
      write_checkpoint(result.checkpoint_path, capture(run));
    }
  }

  result.final_state = capture(run);
  if (opts.write_files) write_checkpoint(result.checkpoint_path, result.final_state);
  result.smoothed = result.episodes.empty() ? std::nan("") : smoothed_return(result.episodes, cfg.smoothing_window);
  return result;
}

InferenceResult run_inference(const Checkpoint& ckpt, const InferenceOptions& opts) {
  if (opts.episodes < 1) throw ConfigError("need at least one evaluation episode");
  const ExperimentConfig cfg = build_config(parse_key_values(ckpt.config_text), opts.overrides);
  const auto encoder = cfg.encoder();
  const std::size_t dim = obs::observation_dim(encoder.mode, static_cast<std::size_t>(cfg.n_swimmers));
  if (dim != ckpt.obs_dim || encoder.mode != ckpt.encoding) {
    throw DimensionError("environment observation dimension " + std::to_string(dim) +
                         " does not match the checkpoint's " + std::to_string(ckpt.obs_dim));
  }

  Rng init_rng(0);
  nn::ActorCritic policy(ckpt.obs_dim, ckpt.hidden_dims, init_rng);
  policy.assign(ckpt.params);
  const obs::RunningNormalizer& norm = ckpt.obs_norm;

  std::shared_ptr<curriculum::CurriculumSchedule> schedule;
  if (cfg.info().target_mode == TargetMode::Curriculum) {
    schedule = std::make_shared<curriculum::CurriculumSchedule>(cfg.curriculum, cfg.radius_min, cfg.radius_max);
    // Evaluate at the difficulty reached during training.
    schedule->restore(std::max(0L, ckpt.curriculum_counter));
  }
  dynamics::SwarmEnv env = make_env(cfg, schedule, rl::derive_seed(cfg.seed, kEvalEnvSeedStream));
  Rng action_rng(rl::derive_seed(cfg.seed, kEvalActionSeedStream));

  std::unique_ptr<TrajectoryWriter> writer;
  if (opts.dump_path) writer = std::make_unique<TrajectoryWriter>(*opts.dump_path, TrajectoryHeader{cfg.physics, cfg.n_swimmers, cfg.experiment});

  InferenceResult result;
  std::vector<double> x(dim);
  const double sigma = std::exp(policy.log_std());
  for (int ep = 0; ep < opts.episodes; ++ep) {
    if (ep > 0) env.reset();
    if (writer) writer->write({ep, 0, std::nullopt, 0, false, dynamics::TerminationReason::None, env.target(), env.state()});
    dynamics::StepOutcome outcome;
    while (!outcome.terminated) {
      obs::encode_into(env.state(), env.target(), encoder, x);
      norm.apply(x);
      const double mu = policy.action_mean(x);
      double action = mu;
      if (!opts.deterministic) {
        std::normal_distribution<double> noise(0.0, 1.0);
        action = mu + sigma * noise(action_rng);
      }
      action = std::clamp(action, cfg.train.action_low, cfg.train.action_high);
      outcome = env.step(action);
      if (writer) {
        writer->write({ep, env.state().step_count, action, outcome.reward, outcome.terminated, outcome.reason,
                       env.target(), env.state()});
      }
    }
    result.returns.push_back(env.state().absorbed_count());
    result.lengths.push_back(env.state().step_count);
  }
  writer.reset();
  double total = 0.0;
  for (int r : result.returns) total += r;
  result.mean_return = total / static_cast<double>(result.returns.size());

  if (opts.svg_dir && opts.dump_path) render_svg(read_trajectory(*opts.dump_path), *opts.svg_dir);
  return result;
}

}  // namespace swarmnav::harness
