#pragma once

// Small dense tanh networks with hand-written reverse mode, the Gaussian
// policy head, and Adam. Parameters live in flat double vectors; an Mlp is a
// layout over such a span so that the actor, the log-std and the critic can
// share one contiguous buffer for the optimizer.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "swarmnav/common.hpp"

namespace swarmnav::nn {

enum class Activation { Tanh };
enum class Init { Orthogonal };

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims{64};
  Activation activation = Activation::Tanh;
  std::size_t output_dim = 1;
  Init init = Init::Orthogonal;
  double hidden_gain = 1.4142135623730951;  // sqrt(2)
  double output_gain = 1.0;

  void validate() const;
};

// Activations recorded by a forward pass.
struct Tape {
  const void* owner = nullptr;
  const double* params = nullptr;
  std::vector<double> input;
  std::vector<std::vector<double>> hidden;  // post-activation, one per hidden layer
};

class Mlp {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;  // in-major: W[k * out + o]
    std::size_t bias_offset = 0;
  };

  Mlp() = default;
  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const noexcept { return spec_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t param_count() const noexcept { return param_count_; }
  std::size_t input_dim() const noexcept { return spec_.input_dim; }
  std::size_t output_dim() const noexcept { return spec_.output_dim; }

  // Orthogonal weights scaled by the layer gain, zero biases.
  void initialize(std::span<double> params, Rng& rng) const;

  // Throws on dimension mismatch or non-finite input.
  void forward(std::span<const double> params, std::span<const double> x, Tape& tape,
               std::span<double> out) const;
  std::pair<std::vector<double>, Tape> forward(std::span<const double> params, std::span<const double> x) const;

  // Accumulates d(output . out_grad)/d(params) into param_grad. The tape must
  // come from forward() on this network with the same parameter buffer.
  void backward(std::span<const double> params, const Tape& tape, std::span<const double> out_grad,
                std::span<double> param_grad) const;

  // Weight entry (row o, column k) in the usual out x in convention.
  static double weight(std::span<const double> params, const Layer& layer, std::size_t o, std::size_t k) {
    return params[layer.weight_offset + k * layer.out + o];
  }

 private:
  MlpSpec spec_;
  std::vector<Layer> layers_;
  std::size_t param_count_ = 0;
};

// Fills a rows x cols matrix (row-major) with an orthogonal matrix times gain:
// orthonormal rows when rows <= cols, orthonormal columns otherwise.
std::vector<double> orthogonal_matrix(std::size_t rows, std::size_t cols, double gain, Rng& rng);

struct GaussianStats {
  double logp = 0.0;
  double entropy = 0.0;
};

GaussianStats gaussian_logprob_entropy(double mean, double log_std, double action) noexcept;

// Actor mean network, a state-independent log standard deviation, and the
// value network, stored back to back: [actor | log_std | critic].
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(std::size_t obs_dim, std::vector<std::size_t> hidden_dims, Rng& rng);

  std::size_t obs_dim() const noexcept { return actor_.input_dim(); }
  const std::vector<std::size_t>& hidden_dims() const noexcept { return actor_.spec().hidden_dims; }
  const Mlp& actor() const noexcept { return actor_; }
  const Mlp& critic() const noexcept { return critic_; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::span<const double> actor_params() const noexcept { return std::span(params_).first(actor_.param_count()); }
  std::span<const double> critic_params() const noexcept {
    return std::span(params_).subspan(critic_offset(), critic_.param_count());
  }
  std::size_t log_std_index() const noexcept { return actor_.param_count(); }
  std::size_t critic_offset() const noexcept { return actor_.param_count() + 1; }
  double log_std() const noexcept { return params_[log_std_index()]; }

  double action_mean(std::span<const double> obs) const;
  double value(std::span<const double> obs) const;

  void assign(std::vector<double> params);

  friend bool operator==(const ActorCritic& a, const ActorCritic& b) { return a.params_ == b.params_; }

 private:
  Mlp actor_;
  Mlp critic_;
  std::vector<double> params_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg);

  // Bias-corrected update. Returns false and leaves everything untouched if
  // any gradient is non-finite.
  bool step(std::span<double> params, std::span<const double> grads);

  AdamConfig& config() noexcept { return cfg_; }
  const AdamConfig& config() const noexcept { return cfg_; }
  const std::vector<double>& first_moment() const noexcept { return m_; }
  const std::vector<double>& second_moment() const noexcept { return v_; }
  std::int64_t timestep() const noexcept { return t_; }
  std::int64_t skipped_steps() const noexcept { return skipped_; }

  void restore(std::vector<double> m, std::vector<double> v, std::int64_t t);

  friend bool operator==(const Adam&, const Adam&) = default;

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
  std::int64_t skipped_ = 0;
};

bool all_finite(std::span<const double> x) noexcept;

}  // namespace swarmnav::nn
