#pragma once

// On-policy actor-critic training: synchronous vectorised rollouts, GAE, and
// the clipped-surrogate update. RPO differs from PPO only in the update
// phase, where the Gaussian mean used to re-score stored actions is shifted
// by Uniform(-alpha, alpha) noise.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "swarmnav/common.hpp"
#include "swarmnav/nn.hpp"
#include "swarmnav/observation.hpp"
#include "swarmnav/swarm_dynamics.hpp"

namespace swarmnav::rl {

enum class Algo { PPO, RPO };

std::string_view to_string(Algo algo) noexcept;
Algo algo_from_string(std::string_view name);

struct TrainConfig {
  Algo algo = Algo::PPO;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_coef = 0.2;
  int num_envs = 1;
  int rollout_horizon = 2048;
  int minibatches = 32;
  int update_epochs = 10;
  double lr = 3e-4;
  bool anneal_lr = true;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  bool clip_value_loss = true;
  bool normalize_advantages = true;
  long total_timesteps = 1'000'000;
  double rpo_alpha = 0.5;
  double action_low = -kPi;
  double action_high = kPi;
  double adam_eps = 1e-8;
  bool normalize_reward = false;
  // Add gamma * V(final state) to the reward of max-step truncations.
  bool bootstrap_truncation = false;
  std::vector<std::size_t> hidden_dims{64};

  void validate() const;
  int batch_size() const noexcept { return num_envs * rollout_horizon; }
  int minibatch_size() const noexcept { return batch_size() / minibatches; }
  int num_updates() const noexcept { return static_cast<int>(total_timesteps / batch_size()); }
};

// Transitions laid out [t][env]; observations are stored normalised.
struct RolloutBuffer {
  std::size_t horizon = 0;
  std::size_t num_envs = 0;
  std::size_t obs_dim = 0;
  std::vector<double> obs;
  std::vector<double> actions;  // sampled, before clipping to the action box
  std::vector<double> logprobs;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;  // episode ended at this transition
  std::vector<double> values;
  std::vector<double> bootstrap_values;  // V(s_T) per env
  std::vector<double> advantages;
  std::vector<double> returns;

  RolloutBuffer() = default;
  RolloutBuffer(std::size_t horizon, std::size_t num_envs, std::size_t obs_dim);

  std::size_t size() const noexcept { return horizon * num_envs; }
  std::size_t index(std::size_t t, std::size_t env) const noexcept { return t * num_envs + env; }
  std::span<const double> observation(std::size_t i) const noexcept {
    return std::span(obs).subspan(i * obs_dim, obs_dim);
  }
  std::span<double> observation(std::size_t i) noexcept { return std::span(obs).subspan(i * obs_dim, obs_dim); }

  friend bool operator==(const RolloutBuffer&, const RolloutBuffer&) = default;
};

// Generalised advantage estimation over [t][env] arrays of horizon*num_envs
// entries. dones[t] means transition t was terminal: no bootstrap across it.
void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const std::uint8_t> dones, std::span<const double> bootstrap_values,
                 std::size_t num_envs, double gamma, double lambda, std::span<double> advantages,
                 std::span<double> returns);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Single-environment convenience.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap_value, double gamma, double lambda);

// mean + u, u ~ Uniform(-alpha, alpha).
double rpo_perturb(double mean, double alpha, Rng& rng);

// In place: mean 0, standard deviation 1 (unbiased, +1e-8), as long as there
// is more than one entry.
void normalize_advantages(std::span<double> adv);

// Scales grad so its L2 norm is at most max_norm. Returns the norm before.
double clip_grad_norm(std::span<double> grad, double max_norm);

struct LossConfig {
  double clip_coef = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  bool clip_value_loss = true;
};

struct LossTerms {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double approx_kl = 0.0;
  double old_approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// A minibatch gathered into contiguous arrays.
struct Minibatch {
  std::size_t obs_dim = 0;
  std::vector<double> obs;
  std::vector<double> actions;
  std::vector<double> logprobs;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> values;

  std::size_t size() const noexcept { return actions.size(); }
};

// PPO loss on a minibatch and its exact gradient with respect to every
// policy parameter (overwritten into grad). mean_shift holds the per-sample
// RPO shift of the Gaussian mean (all zeros for PPO).
LossTerms ppo_loss_and_grad(const nn::ActorCritic& policy, const Minibatch& mb,
                            std::span<const double> mean_shift, const LossConfig& cfg, std::span<double> grad);

struct UpdateDiagnostics {
  int update = 0;
  long global_step = 0;
  double lr = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double old_approx_kl = 0.0;
  double clip_fraction = 0.0;
  double explained_variance = 0.0;
  double action_std = 0.0;
  double grad_norm = 0.0;
  std::int64_t skipped_steps = 0;
};

// Epochs of shuffled minibatch updates over a full buffer with advantages
// already filled in. shuffle_rng drives minibatch order; perturb_rng drives
// the RPO mean shift and is never touched for PPO. Throws NonFiniteError
// when a minibatch loss is not finite.
UpdateDiagnostics ppo_update(const RolloutBuffer& buffer, nn::ActorCritic& policy, nn::Adam& adam,
                             const TrainConfig& cfg, Rng& shuffle_rng, Rng& perturb_rng);

double explained_variance(std::span<const double> predicted, std::span<const double> target);

struct EpisodeRecord {
  long global_step = 0;
  long episode = 0;
  int env = 0;
  int episode_return = 0;  // swimmers absorbed
  int length = 0;
  dynamics::TerminationReason reason = dynamics::TerminationReason::None;
  double curriculum_d = 0.0;  // NaN without a curriculum
};

// Return-based reward scaling (running variance of the discounted return).
struct RewardScaler {
  obs::RunningNormalizer stats{1};
  std::vector<double> running_returns;

  double scale(std::size_t env, double reward, bool done, double gamma);
};

// Owns the environments, the policy, the optimiser and every RNG stream of
// one training run. Single-threaded; state between updates is fully exposed
// for checkpointing.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<dynamics::SwarmEnv> envs, obs::EncoderOptions encoder, std::uint64_t seed);

  const TrainConfig& config() const noexcept { return cfg_; }
  std::size_t obs_dim() const noexcept { return obs_dim_; }

  // Fills the buffer with rollout_horizon synchronous steps of every env.
  void collect_rollout();
  // Rollout, GAE and one PPO/RPO update, with the learning-rate schedule.
  UpdateDiagnostics run_update();
  bool finished() const noexcept { return update_index_ >= cfg_.num_updates(); }

  std::function<void(const EpisodeRecord&)> on_episode;

  const RolloutBuffer& buffer() const noexcept { return buffer_; }
  nn::ActorCritic& policy() noexcept { return policy_; }
  const nn::ActorCritic& policy() const noexcept { return policy_; }
  nn::Adam& adam() noexcept { return adam_; }
  const nn::Adam& adam() const noexcept { return adam_; }
  obs::RunningNormalizer& normalizer() noexcept { return normalizer_; }
  const obs::RunningNormalizer& normalizer() const noexcept { return normalizer_; }
  RewardScaler& reward_scaler() noexcept { return reward_scaler_; }
  const RewardScaler& reward_scaler() const noexcept { return reward_scaler_; }
  std::vector<dynamics::SwarmEnv>& envs() noexcept { return envs_; }
  const std::vector<dynamics::SwarmEnv>& envs() const noexcept { return envs_; }
  const obs::EncoderOptions& encoder() const noexcept { return encoder_; }

  Rng& action_rng() noexcept { return action_rng_; }
  Rng& shuffle_rng() noexcept { return shuffle_rng_; }
  Rng& perturb_rng() noexcept { return perturb_rng_; }
  const Rng& action_rng() const noexcept { return action_rng_; }
  const Rng& shuffle_rng() const noexcept { return shuffle_rng_; }
  const Rng& perturb_rng() const noexcept { return perturb_rng_; }

  const std::vector<double>& next_obs() const noexcept { return next_obs_; }
  long global_step() const noexcept { return global_step_; }
  int update_index() const noexcept { return update_index_; }
  long episodes_completed() const noexcept { return episodes_completed_; }

  // Overwrites the between-update bookkeeping (checkpoint restore).
  void restore_progress(std::vector<double> next_obs, long global_step, int update_index, long episodes_completed);

 private:
  void observe_all(bool update_stats);

  TrainConfig cfg_;
  std::vector<dynamics::SwarmEnv> envs_;
  obs::EncoderOptions encoder_;
  std::size_t obs_dim_ = 0;
  nn::ActorCritic policy_;
  nn::Adam adam_;
  obs::RunningNormalizer normalizer_;
  RewardScaler reward_scaler_;
  Rng action_rng_;
  Rng shuffle_rng_;
  Rng perturb_rng_;
  RolloutBuffer buffer_;
  std::vector<double> next_obs_;  // num_envs x obs_dim, normalised
  std::vector<double> raw_obs_;
  long global_step_ = 0;
  int update_index_ = 0;
  long episodes_completed_ = 0;
};

// Deterministic per-stream seeds derived from one run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace swarmnav::rl
