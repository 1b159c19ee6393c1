#pragma once

// Matrix exponential learning: the score matrix accumulates negative
// gradients and the transmit profile is its trace-normalized exponential
// with step eta / sqrt(n). Also the noisy-feedback model and the regret
// guarantees the learner enjoys.

#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <utility>

#include "mxl/channel.hpp"
#include "mxl/errors.hpp"
#include "mxl/hermlin.hpp"
#include "mxl/objective.hpp"

namespace mxl {

class LearnerState {
 public:
  LearnerState(int num_blocks, int dim, double eta, double pmax)
      : eta_(eta),
        pmax_(pmax),
        score_(check(num_blocks, dim, eta, pmax)),
        current_(logit_map(score_, pmax)) {}

  // n <- n + 1; Y <- Y - V; Q <- logit(eta / sqrt(n) * Y).
  void update(const GradientMatrix& v) {
    score_.same_shape(v.blocks);
    score_ -= v.blocks;
    ++n_;
    current_ = logit_map(score_ * (eta_ / std::sqrt(static_cast<double>(n_))), pmax_);
  }

  int frame() const { return n_; }
  double eta() const { return eta_; }
  double pmax() const { return pmax_; }
  const BlockDiagHermitian& score() const { return score_; }
  const PowerProfile& profile() const { return current_; }

 private:
  static BlockDiagHermitian check(int num_blocks, int dim, double eta, double pmax) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidInput("learner: eta must be positive");
    if (!(pmax > 0.0) || !std::isfinite(pmax)) throw InvalidInput("learner: pmax must be positive");
    if (num_blocks < 1 || dim < 1) throw InvalidInput("learner: need at least one block of positive size");
    return BlockDiagHermitian::zero(num_blocks, dim);
  }

  int n_ = 0;
  double eta_;
  double pmax_;
  BlockDiagHermitian score_;
  PowerProfile current_;
};

inline LearnerState init_learner(int num_blocks, int dim, double eta, double pmax) {
  return LearnerState(num_blocks, dim, eta, pmax);
}

inline LearnerState mxl_update(LearnerState state, const GradientMatrix& v) {
  state.update(v);
  return state;
}

// Additive feedback error Xi on the gradient.
struct NoiseModel {
  enum class Kind { none, gaussian_hermitian };

  Kind kind = Kind::none;
  double sigma = 0.0;  // target E||Xi|| (spectral)

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma) {
    if (!(sigma >= 0.0)) throw InvalidInput("NoiseModel: sigma must be nonnegative");
    return {Kind::gaussian_hermitian, sigma};
  }
};

namespace detail {

// Blockwise GUE-like draw: N(0, s^2) on the diagonal, N(0, s^2/2) for each
// real and imaginary part off the diagonal.
inline BlockDiagHermitian gue_blocks(Rng& rng, int num_blocks, int dim, double s) {
  std::normal_distribution<double> diag(0.0, s);
  std::normal_distribution<double> off(0.0, s / std::sqrt(2.0));
  BlockDiagHermitian out;
  out.blocks.reserve(static_cast<std::size_t>(num_blocks));
  for (int k = 0; k < num_blocks; ++k) {
    CMatrix m = CMatrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
      m(i, i) = diag(rng);
      for (int j = i + 1; j < dim; ++j) {
        const double re = off(rng);
        const double im = off(rng);
        m(i, j) = cplx(re, im);
        m(j, i) = cplx(re, -im);
      }
    }
    out.blocks.emplace_back(m);
  }
  return out;
}

}  // namespace detail

// E||Xi|| for unit entry scale, by Monte-Carlo with a fixed seed; cached per shape.
inline double gue_norm_scale(int num_blocks, int dim) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, double> cache;
  std::lock_guard lock(mu);
  auto key = std::make_pair(num_blocks, dim);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  constexpr int kSamples = 4000;
  Rng rng(0x6775655F63616CULL);
  double sum = 0.0;
  for (int i = 0; i < kSamples; ++i) sum += spectral_norm(detail::gue_blocks(rng, num_blocks, dim, 1.0));
  const double scale = sum / kSamples;
  cache.emplace(key, scale);
  return scale;
}

// Per-entry standard deviation that gives E||Xi|| ~= sigma.
inline double noise_entry_scale(const NoiseModel& noise, int num_blocks, int dim) {
  if (noise.kind == NoiseModel::Kind::none || noise.sigma == 0.0) return 0.0;
  return noise.sigma / gue_norm_scale(num_blocks, dim);
}

inline GradientMatrix perturb_gradient(const GradientMatrix& v, const NoiseModel& noise, Rng& rng) {
  if (noise.kind == NoiseModel::Kind::none || noise.sigma == 0.0) return v;
  const int k = v.blocks.num_blocks();
  const int m = v.blocks.blocks.front().dim();
  const double s = noise_entry_scale(noise, k, m);
  return GradientMatrix{v.blocks + detail::gue_blocks(rng, k, m, s)};
}

// eta minimizing the T^{-1/2} term of the regret bound.
inline double optimal_eta(double vbar, int num_blocks, int dim) {
  if (!(vbar > 0.0) || !std::isfinite(vbar)) throw InvalidInput("optimal_eta: vbar must be positive");
  if (num_blocks < 1 || dim < 1) throw InvalidInput("optimal_eta: invalid dimensions");
  return std::sqrt(2.0 * std::log1p(static_cast<double>(num_blocks) * dim)) / vbar;
}

// Bound on the average regret Reg(T)/T after T frames.
inline double regret_bound(int horizon, double eta, double pmax, double vbar, int num_blocks, int dim) {
  if (horizon < 1) throw InvalidInput("regret_bound: horizon must be positive");
  if (!(eta > 0.0) || !(pmax > 0.0) || !(vbar > 0.0)) throw InvalidInput("regret_bound: parameters must be positive");
  if (num_blocks < 1 || dim < 1) throw InvalidInput("regret_bound: invalid dimensions");
  const double t = static_cast<double>(horizon);
  const double entropy = std::log1p(static_cast<double>(num_blocks) * dim);
  const double v2 = vbar * vbar;
  return (pmax * entropy / eta + eta * pmax * v2 / 2.0) / std::sqrt(t) + eta * pmax * v2 / (4.0 * t);
}

// Same bound with the second-moment estimate of the noisy gradients.
inline double mean_regret_bound(int horizon, double eta, double pmax, double vbar_noisy, int num_blocks, int dim) {
  return regret_bound(horizon, eta, pmax, vbar_noisy, num_blocks, dim);
}

}  // namespace mxl
