#include "swarmnav/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "swarmnav/errors.hpp"
#include "swarmnav/simd/kernels.hpp"

namespace swarmnav::nn {

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ConfigError("MLP dimensions must be positive");
  for (auto h : hidden_dims) {
    if (h == 0) throw ConfigError("MLP hidden width must be positive");
  }
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t in = spec_.input_dim;
  std::size_t offset = 0;
  auto add = [&](std::size_t out) {
    Layer l{in, out, offset, offset + in * out};
    offset += in * out + out;
    layers_.push_back(l);
    in = out;
  };
  for (auto h : spec_.hidden_dims) add(h);
  add(spec_.output_dim);
  param_count_ = offset;
}

std::vector<double> orthogonal_matrix(std::size_t rows, std::size_t cols, double gain, Rng& rng) {
  const bool transpose = rows < cols;
  const auto tall = static_cast<Eigen::Index>(transpose ? cols : rows);
  const auto small = static_cast<Eigen::Index>(transpose ? rows : cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(tall, small);
  for (Eigen::Index c = 0; c < small; ++c) {
    for (Eigen::Index r = 0; r < tall; ++r) a(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, small);
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index c = 0; c < small; ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = transpose ? q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))
                                 : q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out[i * cols + j] = gain * v;
    }
  }
  return out;
}

void Mlp::initialize(std::span<double> params, Rng& rng) const {
  if (params.size() != param_count_) throw DimensionError("MLP parameter buffer has wrong size");
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    const double gain = li + 1 == layers_.size() ? spec_.output_gain : spec_.hidden_gain;
    const auto w = orthogonal_matrix(l.out, l.in, gain, rng);
    for (std::size_t o = 0; o < l.out; ++o) {
      for (std::size_t k = 0; k < l.in; ++k) params[l.weight_offset + k * l.out + o] = w[o * l.in + k];
    }
    std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(l.bias_offset), l.out, 0.0);
  }
}

namespace {

// out = b + W a, with W stored in-major.
void affine(const simd::KernelTable& kt, std::span<const double> params, const Mlp::Layer& l,
            std::span<const double> a, double* out) {
  const double* w = params.data() + l.weight_offset;
  const double* b = params.data() + l.bias_offset;
  if (l.out == 1) {
    out[0] = b[0] + kt.dot(a.data(), w, l.in);
    return;
  }
  std::copy_n(b, l.out, out);
  for (std::size_t k = 0; k < l.in; ++k) kt.axpy(a[k], w + k * l.out, out, l.out);
}

}  // namespace

void Mlp::forward(std::span<const double> params, std::span<const double> x, Tape& tape,
                  std::span<double> out) const {
  if (params.size() != param_count_) throw DimensionError("MLP parameter buffer has wrong size");
  if (x.size() != spec_.input_dim) throw DimensionError("MLP input has wrong dimension");
  if (out.size() != spec_.output_dim) throw DimensionError("MLP output buffer has wrong dimension");
  if (!all_finite(x)) throw ContractViolation("non-finite MLP input");

  const auto& kt = simd::active();
  tape.owner = this;
  tape.params = params.data();
  tape.input.assign(x.begin(), x.end());
  tape.hidden.resize(layers_.size() - 1);

  std::span<const double> a = tape.input;
  for (std::size_t li = 0; li + 1 < layers_.size(); ++li) {
    auto& h = tape.hidden[li];
    h.resize(layers_[li].out);
    affine(kt, params, layers_[li], a, h.data());
    for (auto& v : h) v = std::tanh(v);
    a = h;
  }
  affine(kt, params, layers_.back(), a, out.data());
}

std::pair<std::vector<double>, Tape> Mlp::forward(std::span<const double> params, std::span<const double> x) const {
  std::vector<double> out(spec_.output_dim);
  Tape tape;
  forward(params, x, tape, out);
  return {std::move(out), std::move(tape)};
}

void Mlp::backward(std::span<const double> params, const Tape& tape, std::span<const double> out_grad,
                   std::span<double> param_grad) const {
  if (tape.owner != this || tape.params != params.data() || tape.input.size() != spec_.input_dim ||
      tape.hidden.size() + 1 != layers_.size()) {
    throw ContractViolation("tape does not belong to this network and parameter buffer");
  }
  if (out_grad.size() != spec_.output_dim) throw DimensionError("output gradient has wrong dimension");
  if (param_grad.size() != param_count_) throw DimensionError("gradient buffer has wrong size");

  const auto& kt = simd::active();
  thread_local std::vector<double> delta;
  thread_local std::vector<double> prev;
  delta.assign(out_grad.begin(), out_grad.end());

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& l = layers_[li];
    const std::vector<double>& a = li == 0 ? tape.input : tape.hidden[li - 1];
    double* gw = param_grad.data() + l.weight_offset;
    double* gb = param_grad.data() + l.bias_offset;
    const double* w = params.data() + l.weight_offset;

    for (std::size_t o = 0; o < l.out; ++o) gb[o] += delta[o];
    if (l.out == 1) {
      kt.axpy(delta[0], a.data(), gw, l.in);
    } else {
      for (std::size_t k = 0; k < l.in; ++k) kt.axpy(a[k], delta.data(), gw + k * l.out, l.out);
    }
    if (li == 0) break;

    prev.resize(l.in);
    if (l.out == 1) {
      for (std::size_t k = 0; k < l.in; ++k) prev[k] = w[k] * delta[0];
    } else {
      for (std::size_t k = 0; k < l.in; ++k) prev[k] = kt.dot(w + k * l.out, delta.data(), l.out);
    }
    kt.tanh_backward(a.data(), prev.data(), l.in);
    delta.swap(prev);
  }
}

GaussianStats gaussian_logprob_entropy(double mean, double log_std, double action) noexcept {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)
  const double z = (action - mean) / std::exp(log_std);
  return {-0.5 * z * z - log_std - kHalfLog2Pi, 0.5 + kHalfLog2Pi + log_std};
}

ActorCritic::ActorCritic(std::size_t obs_dim, std::vector<std::size_t> hidden_dims, Rng& rng) {
  MlpSpec a;
  a.input_dim = obs_dim;
  a.hidden_dims = hidden_dims;
  a.output_dim = 1;
  a.output_gain = 0.01;
  MlpSpec c = a;
  c.output_gain = 1.0;
  actor_ = Mlp(a);
  critic_ = Mlp(c);
  params_.assign(actor_.param_count() + 1 + critic_.param_count(), 0.0);
  auto all = std::span(params_);
  actor_.initialize(all.first(actor_.param_count()), rng);
  params_[log_std_index()] = 0.0;
  critic_.initialize(all.subspan(critic_offset(), critic_.param_count()), rng);
}

double ActorCritic::action_mean(std::span<const double> obs) const {
  Tape tape;
  double out = 0.0;
  actor_.forward(actor_params(), obs, tape, std::span(&out, 1));
  return out;
}

double ActorCritic::value(std::span<const double> obs) const {
  Tape tape;
  double out = 0.0;
  critic_.forward(critic_params(), obs, tape, std::span(&out, 1));
  return out;
}

void ActorCritic::assign(std::vector<double> params) {
  if (params.size() != params_.size()) throw DimensionError("parameter vector has wrong size");
  params_ = std::move(params);
}

bool all_finite(std::span<const double> x) noexcept {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

Adam::Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

bool Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw DimensionError("Adam shape mismatch");
  if (!all_finite(grads)) {
    ++skipped_;
    return false;
  }
  ++t_;
  const double td = static_cast<double>(t_);
  const simd::AdamCoeffs c{cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps, 1.0 - std::pow(cfg_.beta1, td),
                           1.0 - std::pow(cfg_.beta2, td)};
  simd::active().adam_update(params.data(), grads.data(), m_.data(), v_.data(), m_.size(), c);
  return true;
}

void Adam::restore(std::vector<double> m, std::vector<double> v, std::int64_t t) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw DimensionError("Adam state size mismatch");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

}  // namespace swarmnav::nn
