#include "swarmnav/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "swarmnav/errors.hpp"
#include "swarmnav/simd/kernels.hpp"

namespace swarmnav::rl {

std::string_view to_string(Algo algo) noexcept { return algo == Algo::PPO ? "ppo" : "rpo"; }

Algo algo_from_string(std::string_view name) {
  if (name == "ppo" || name == "PPO") return Algo::PPO;
  if (name == "rpo" || name == "RPO") return Algo::RPO;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must be in [0, 1]");
  if (!(clip_coef > 0.0)) throw ConfigError("clip_coef must be positive");
  if (num_envs < 1 || rollout_horizon < 1 || minibatches < 1 || update_epochs < 1) {
    throw ConfigError("num_envs, rollout_horizon, minibatches and update_epochs must be positive");
  }
  if (batch_size() % minibatches != 0) throw ConfigError("batch size must be divisible by minibatches");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be positive");
  if (!(rpo_alpha >= 0.0)) throw ConfigError("rpo_alpha must be non-negative");
  if (!(action_high > action_low)) throw ConfigError("empty action interval");
  if (total_timesteps < batch_size()) throw ConfigError("total_timesteps is smaller than one rollout");
  if (hidden_dims.empty()) throw ConfigError("at least one hidden layer is required");
}

RolloutBuffer::RolloutBuffer(std::size_t h, std::size_t e, std::size_t d)
    : horizon(h),
      num_envs(e),
      obs_dim(d),
      obs(h * e * d),
      actions(h * e),
      logprobs(h * e),
      rewards(h * e),
      dones(h * e),
      values(h * e),
      bootstrap_values(e),
      advantages(h * e),
      returns(h * e) {}

void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const std::uint8_t> dones, std::span<const double> bootstrap_values,
                 std::size_t num_envs, double gamma, double lambda, std::span<double> advantages,
                 std::span<double> returns) {
  const std::size_t n = rewards.size();
  if (num_envs == 0 || n % num_envs != 0 || values.size() != n || dones.size() != n || advantages.size() != n ||
      returns.size() != n || bootstrap_values.size() != num_envs) {
    throw DimensionError("compute_gae: misaligned inputs");
  }
  const std::size_t horizon = n / num_envs;
  for (std::size_t e = 0; e < num_envs; ++e) {
    double last = 0.0;
    for (std::size_t t = horizon; t-- > 0;) {
      const std::size_t i = t * num_envs + e;
      const double next_value = t + 1 == horizon ? bootstrap_values[e] : values[i + num_envs];
      const double live = dones[i] ? 0.0 : 1.0;
      const double delta = rewards[i] + gamma * next_value * live - values[i];
      last = delta + gamma * lambda * live * last;
      advantages[i] = last;
      returns[i] = last + values[i];
    }
  }
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap_value, double gamma, double lambda) {
  GaeResult r{std::vector<double>(rewards.size()), std::vector<double>(rewards.size())};
  compute_gae(rewards, values, dones, std::span(&bootstrap_value, 1), 1, gamma, lambda, r.advantages, r.returns);
  return r;
}

double rpo_perturb(double mean, double alpha, Rng& rng) {
  std::uniform_real_distribution<double> u(-alpha, alpha);
  return mean + u(rng);
}

void normalize_advantages(std::span<double> adv) {
  const std::size_t n = adv.size();
  if (n < 2) return;
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double a : adv) ss += (a - mean) * (a - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  for (double& a : adv) a = (a - mean) / (sd + 1e-8);
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  const double norm = std::sqrt(simd::sum_squares(grad));
  const double coef = max_norm / (norm + 1e-6);
  if (coef < 1.0) simd::scale(coef, grad);
  return norm;
}

LossTerms ppo_loss_and_grad(const nn::ActorCritic& policy, const Minibatch& mb, std::span<const double> mean_shift,
                            const LossConfig& cfg, std::span<double> grad) {
  const std::size_t b = mb.size();
  if (b == 0 || mean_shift.size() != b || mb.obs.size() != b * mb.obs_dim || mb.obs_dim != policy.obs_dim()) {
    throw DimensionError("ppo_loss_and_grad: minibatch shape mismatch");
  }
  if (grad.size() != policy.params().size()) throw DimensionError("ppo_loss_and_grad: gradient size mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);

  const auto params = policy.params();
  const auto actor_params = policy.actor_params();
  const auto critic_params = policy.critic_params();
  auto actor_grad = grad.first(policy.actor().param_count());
  auto critic_grad = grad.subspan(policy.critic_offset(), policy.critic().param_count());
  double& log_std_grad = grad[policy.log_std_index()];

  const double log_std = params[policy.log_std_index()];
  const double sigma = std::exp(log_std);
  const double inv_b = 1.0 / static_cast<double>(b);

  thread_local nn::Tape actor_tape;
  thread_local nn::Tape critic_tape;

  LossTerms out;
  for (std::size_t j = 0; j < b; ++j) {
    const auto o = std::span(mb.obs).subspan(j * mb.obs_dim, mb.obs_dim);
    double mu = 0.0;
    double v = 0.0;
    policy.actor().forward(actor_params, o, actor_tape, std::span(&mu, 1));
    policy.critic().forward(critic_params, o, critic_tape, std::span(&v, 1));

    const double shifted = mu + mean_shift[j];
    const auto g = nn::gaussian_logprob_entropy(shifted, log_std, mb.actions[j]);
    const double z = (mb.actions[j] - shifted) / sigma;
    const double logratio = g.logp - mb.logprobs[j];
    const double ratio = std::exp(logratio);
    const double adv = mb.advantages[j];

    const double pg1 = -adv * ratio;
    const double pg2 = -adv * std::clamp(ratio, 1.0 - cfg.clip_coef, 1.0 + cfg.clip_coef);
    out.policy_loss += std::max(pg1, pg2);
    out.entropy += g.entropy;
    out.old_approx_kl += -logratio;
    out.approx_kl += (ratio - 1.0) - logratio;
    if (std::abs(ratio - 1.0) > cfg.clip_coef) out.clip_fraction += 1.0;

    // d policy_loss / d logp
    const double d_logp = pg1 >= pg2 ? -adv * ratio * inv_b : 0.0;
    const double d_mu = d_logp * z / sigma;
    log_std_grad += d_logp * (z * z - 1.0);
    if (d_mu != 0.0) policy.actor().backward(actor_params, actor_tape, std::span(&d_mu, 1), actor_grad);

    double d_v = 0.0;
    if (cfg.clip_value_loss) {
      const double unclipped = (v - mb.returns[j]) * (v - mb.returns[j]);
      const double dv = v - mb.values[j];
      const double vc = mb.values[j] + std::clamp(dv, -cfg.clip_coef, cfg.clip_coef);
      const double clipped = (vc - mb.returns[j]) * (vc - mb.returns[j]);
      out.value_loss += 0.5 * std::max(unclipped, clipped);
      if (unclipped >= clipped) {
        d_v = v - mb.returns[j];
      } else if (dv > -cfg.clip_coef && dv < cfg.clip_coef) {
        d_v = vc - mb.returns[j];
      }
    } else {
      out.value_loss += 0.5 * (v - mb.returns[j]) * (v - mb.returns[j]);
      d_v = v - mb.returns[j];
    }
    d_v *= cfg.value_coef * inv_b;
    if (d_v != 0.0) policy.critic().backward(critic_params, critic_tape, std::span(&d_v, 1), critic_grad);
  }
  log_std_grad -= cfg.entropy_coef;

  out.policy_loss *= inv_b;
  out.value_loss *= inv_b;
  out.entropy *= inv_b;
  out.approx_kl *= inv_b;
  out.old_approx_kl *= inv_b;
  out.clip_fraction *= inv_b;
  out.total = out.policy_loss - cfg.entropy_coef * out.entropy + cfg.value_coef * out.value_loss;
  return out;
}

double explained_variance(std::span<const double> predicted, std::span<const double> target) {
  const std::size_t n = target.size();
  if (n == 0 || predicted.size() != n) return 0.0;
  auto var = [n](auto&& f) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += f(i);
    m /= static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (f(i) - m) * (f(i) - m);
    return s / static_cast<double>(n);
  };
  const double vy = var([&](std::size_t i) { return target[i]; });
  if (vy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - var([&](std::size_t i) { return target[i] - predicted[i]; }) / vy;
}

UpdateDiagnostics ppo_update(const RolloutBuffer& buffer, nn::ActorCritic& policy, nn::Adam& adam,
                             const TrainConfig& cfg, Rng& shuffle_rng, Rng& perturb_rng) {
  const std::size_t n = buffer.size();
  const std::size_t mb_size = n / static_cast<std::size_t>(cfg.minibatches);
  const LossConfig loss_cfg{cfg.clip_coef, cfg.value_coef, cfg.entropy_coef, cfg.clip_value_loss};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(policy.params().size());
  std::vector<double> shift(mb_size, 0.0);
  Minibatch mb;
  mb.obs_dim = buffer.obs_dim;
  mb.obs.resize(mb_size * buffer.obs_dim);
  for (auto* v : {&mb.actions, &mb.logprobs, &mb.advantages, &mb.returns, &mb.values}) v->resize(mb_size);

  UpdateDiagnostics diag;
  double clip_sum = 0.0;
  std::size_t clip_count = 0;
  const std::int64_t skipped_before = adam.skipped_steps();

  for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start + mb_size <= n; start += mb_size) {
      for (std::size_t k = 0; k < mb_size; ++k) {
        const std::size_t i = order[start + k];
        std::copy_n(buffer.observation(i).begin(), buffer.obs_dim, mb.obs.begin() + static_cast<std::ptrdiff_t>(k * buffer.obs_dim));
        mb.actions[k] = buffer.actions[i];
        mb.logprobs[k] = buffer.logprobs[i];
        mb.advantages[k] = buffer.advantages[i];
        mb.returns[k] = buffer.returns[i];
        mb.values[k] = buffer.values[i];
      }
      if (cfg.normalize_advantages) normalize_advantages(mb.advantages);
      if (cfg.algo == Algo::RPO) {
        for (auto& s : shift) s = rpo_perturb(0.0, cfg.rpo_alpha, perturb_rng);
      }

      const LossTerms terms = ppo_loss_and_grad(policy, mb, shift, loss_cfg, grad);
      if (!std::isfinite(terms.total)) {
        throw NonFiniteError("non-finite loss in update " + std::to_string(diag.update) + ", epoch " +
                             std::to_string(epoch));
      }
      diag.grad_norm = clip_grad_norm(grad, cfg.max_grad_norm);
      adam.step(policy.params(), grad);

      diag.policy_loss = terms.policy_loss;
      diag.value_loss = terms.value_loss;
      diag.entropy = terms.entropy;
      diag.approx_kl = terms.approx_kl;
      diag.old_approx_kl = terms.old_approx_kl;
      clip_sum += terms.clip_fraction;
      ++clip_count;
    }
  }
  const double log_std = policy.params()[policy.log_std_index()];
  if (!std::isfinite(std::exp(log_std)) || !nn::all_finite(policy.params())) {
    throw NonFiniteError("policy parameters became non-finite");
  }
  diag.clip_fraction = clip_count ? clip_sum / static_cast<double>(clip_count) : 0.0;
  diag.explained_variance = explained_variance(buffer.values, buffer.returns);
  diag.action_std = std::exp(log_std);
  diag.lr = adam.config().lr;
  diag.skipped_steps = adam.skipped_steps() - skipped_before;
  return diag;
}

double RewardScaler::scale(std::size_t env, double reward, bool done, double gamma) {
  double& ret = running_returns.at(env);
  ret = ret * gamma + reward;
  stats.update(std::span(&ret, 1));
  const double scaled = std::clamp(reward / std::sqrt(stats.variance()[0] + obs::kNormEpsilon), -obs::kNormClip,
                                   obs::kNormClip);
  if (done) ret = 0.0;
  return scaled;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Trainer::Trainer(TrainConfig cfg, std::vector<dynamics::SwarmEnv> envs, obs::EncoderOptions encoder,
                 std::uint64_t seed)
    : cfg_(std::move(cfg)),
      envs_(std::move(envs)),
      encoder_(encoder),
      action_rng_(derive_seed(seed, 1)),
      shuffle_rng_(derive_seed(seed, 2)),
      perturb_rng_(derive_seed(seed, 3)) {
  cfg_.validate();
  if (envs_.size() != static_cast<std::size_t>(cfg_.num_envs)) {
    throw ConfigError("number of environments does not match num_envs");
  }
  obs_dim_ = obs::observation_dim(encoder_.mode, envs_.front().state().size());
  for (const auto& env : envs_) {
    if (obs::observation_dim(encoder_.mode, env.state().size()) != obs_dim_) {
      throw ConfigError("environments disagree on observation size");
    }
  }
  Rng init_rng(derive_seed(seed, 0));
  policy_ = nn::ActorCritic(obs_dim_, cfg_.hidden_dims, init_rng);
  adam_ = nn::Adam(policy_.params().size(), nn::AdamConfig{cfg_.lr, 0.9, 0.999, cfg_.adam_eps});
  normalizer_ = obs::RunningNormalizer(obs_dim_);
  reward_scaler_.running_returns.assign(envs_.size(), 0.0);
  buffer_ = RolloutBuffer(static_cast<std::size_t>(cfg_.rollout_horizon), envs_.size(), obs_dim_);
  next_obs_.resize(envs_.size() * obs_dim_);
  raw_obs_.resize(envs_.size() * obs_dim_);
  observe_all(true);
}

void Trainer::observe_all(bool update_stats) {
  for (std::size_t e = 0; e < envs_.size(); ++e) {
    obs::encode_into(envs_[e].state(), envs_[e].target(), encoder_,
                     std::span(raw_obs_).subspan(e * obs_dim_, obs_dim_));
  }
  if (update_stats) normalizer_.update(raw_obs_, envs_.size());
  next_obs_ = raw_obs_;
  for (std::size_t e = 0; e < envs_.size(); ++e) normalizer_.apply(std::span(next_obs_).subspan(e * obs_dim_, obs_dim_));
}

void Trainer::collect_rollout() {
  const std::size_t ne = envs_.size();
  const double log_std = policy_.log_std();
  const double sigma = std::exp(log_std);
  std::vector<double> terminal_obs(obs_dim_);

  for (std::size_t t = 0; t < buffer_.horizon; ++t) {
    global_step_ += static_cast<long>(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      const std::size_t i = buffer_.index(t, e);
      const auto o = std::span<const double>(next_obs_).subspan(e * obs_dim_, obs_dim_);
      std::copy(o.begin(), o.end(), buffer_.observation(i).begin());
      buffer_.values[i] = policy_.value(o);
      const double mu = policy_.action_mean(o);
      std::normal_distribution<double> noise(0.0, 1.0);
      const double action = mu + sigma * noise(action_rng_);
      buffer_.actions[i] = action;
      buffer_.logprobs[i] = nn::gaussian_logprob_entropy(mu, log_std, action).logp;

      auto& env = envs_[e];
      const auto outcome = env.step(std::clamp(action, cfg_.action_low, cfg_.action_high));
      double reward = outcome.reward;
      if (outcome.terminated) {
        if (cfg_.bootstrap_truncation && outcome.reason == dynamics::TerminationReason::MaxSteps) {
          obs::encode_into(env.state(), env.target(), encoder_, terminal_obs);
          normalizer_.apply(terminal_obs);
          reward += cfg_.gamma * policy_.value(terminal_obs);
        }
        EpisodeRecord rec;
        rec.global_step = global_step_;
        rec.episode = episodes_completed_++;
        rec.env = static_cast<int>(e);
        rec.episode_return = env.state().absorbed_count();
        rec.length = env.state().step_count;
        rec.reason = outcome.reason;
        rec.curriculum_d = env.episode_tag();
        if (on_episode) on_episode(rec);
        env.reset();
      }
      if (cfg_.normalize_reward) reward = reward_scaler_.scale(e, reward, outcome.terminated, cfg_.gamma);
      buffer_.rewards[i] = reward;
      buffer_.dones[i] = outcome.terminated ? 1 : 0;
    }
    observe_all(true);
  }
  for (std::size_t e = 0; e < ne; ++e) {
    buffer_.bootstrap_values[e] = policy_.value(std::span<const double>(next_obs_).subspan(e * obs_dim_, obs_dim_));
  }
}

UpdateDiagnostics Trainer::run_update() {
  if (finished()) throw ContractViolation("training already finished");
  if (cfg_.anneal_lr) {
    const double frac = 1.0 - static_cast<double>(update_index_) / static_cast<double>(cfg_.num_updates());
    adam_.config().lr = frac * cfg_.lr;
  }
  collect_rollout();
  compute_gae(buffer_.rewards, buffer_.values, buffer_.dones, buffer_.bootstrap_values, buffer_.num_envs, cfg_.gamma,
              cfg_.gae_lambda, buffer_.advantages, buffer_.returns);
  UpdateDiagnostics diag = ppo_update(buffer_, policy_, adam_, cfg_, shuffle_rng_, perturb_rng_);
  ++update_index_;
  diag.update = update_index_;
  diag.global_step = global_step_;
  return diag;
}

void Trainer::restore_progress(std::vector<double> next_obs, long global_step, int update_index,
                               long episodes_completed) {
  if (next_obs.size() != next_obs_.size()) throw DimensionError("restored observation batch has wrong size");
  next_obs_ = std::move(next_obs);
  global_step_ = global_step;
  update_index_ = update_index;
  episodes_completed_ = episodes_completed;
}

}  // namespace swarmnav::rl
