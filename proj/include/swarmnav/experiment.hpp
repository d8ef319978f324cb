#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swarmnav/checkpoint.hpp"
#include "swarmnav/config.hpp"
#include "swarmnav/curriculum.hpp"
#include "swarmnav/ppo.hpp"

namespace swarmnav::harness {

// Seed streams derived from the run seed.
inline constexpr std::uint64_t kEnvSeedStream = 100;
inline constexpr std::uint64_t kEvalEnvSeedStream = 10'000;
inline constexpr std::uint64_t kEvalActionSeedStream = 10'001;

// A configured trainer plus the curriculum schedule its environments share.
struct Run {
  ExperimentConfig config;
  std::shared_ptr<curriculum::CurriculumSchedule> schedule;  // null without curriculum
  std::unique_ptr<rl::Trainer> trainer;

  long curriculum_counter() const noexcept { return schedule ? schedule->episode_counter() : -1; }
};

dynamics::TargetSampler make_target_sampler(const ExperimentConfig& cfg,
                                            const std::shared_ptr<curriculum::CurriculumSchedule>& schedule);
dynamics::SwarmEnv make_env(const ExperimentConfig& cfg, const std::shared_ptr<curriculum::CurriculumSchedule>& schedule,
                            std::uint64_t seed);
Run make_run(const ExperimentConfig& cfg);

Checkpoint capture(const Run& run);
// Rebuilds a run from a checkpoint (config taken from the checkpoint itself).
Run resume_run(const Checkpoint& ckpt);

// Trailing mean of the last `window` episodic returns (all of them when
// fewer). Throws ContractViolation when there are no episodes.
double smoothed_return(std::span<const rl::EpisodeRecord> records, int window);

inline constexpr const char* kEpisodeCsvHeader = "global_step,episode,return,length,reason,curriculum_d";
inline constexpr const char* kUpdateCsvHeader =
    "update,global_step,lr,policy_loss,value_loss,entropy,approx_kl,old_approx_kl,clip_fraction,explained_variance,"
    "action_std,grad_norm,skipped_steps";

std::string episode_csv_row(const rl::EpisodeRecord& rec);
std::string update_csv_row(const rl::UpdateDiagnostics& d);

// $SWARMNAV_OUTPUT_ROOT (default: current directory) joined with the run's
// output_dir or run name.
std::filesystem::path output_root();
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

struct TrainingOptions {
  std::optional<std::filesystem::path> resume_from;
  bool write_files = true;
  // Stop after this many updates in total (0: run to total_timesteps).
  int max_updates = 0;
  bool verbose = false;
};

struct TrainingResult {
  ExperimentConfig config;
  std::vector<rl::EpisodeRecord> episodes;  // this invocation only
  std::vector<rl::UpdateDiagnostics> updates;
  double smoothed = 0.0;                    // NaN when no episode finished
  std::filesystem::path output_dir;
  std::filesystem::path checkpoint_path;
  Checkpoint final_state;
};

// Full training loop with CSV logs (episodes.csv, updates.csv) and
// checkpoints (checkpoint.bin). A non-finite loss saves checkpoint_nan.bin
// and rethrows.
TrainingResult run_training(const ExperimentConfig& cfg, const TrainingOptions& opts = {});

struct InferenceOptions {
  int episodes = 100;
  bool deterministic = false;
  KeyValues overrides;  // applied on top of the checkpoint's config
  std::optional<std::filesystem::path> dump_path;
  std::optional<std::filesystem::path> svg_dir;
};

struct InferenceResult {
  std::vector<int> returns;
  std::vector<int> lengths;
  double mean_return = 0.0;
};

// Rolls out the checkpointed policy with frozen observation statistics.
// Throws DimensionError when the overridden environment does not match the
// checkpoint's observation size.
InferenceResult run_inference(const Checkpoint& ckpt, const InferenceOptions& opts);

}  // namespace swarmnav::harness
