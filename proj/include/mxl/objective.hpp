#pragma once

// The focal user's loss L(Q) = tr Q - phi(R(Q)): achievable rate over the
// effective channel, the rate shaper phi and the matrix gradient of L.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mxl/errors.hpp"
#include "mxl/hermlin.hpp"

namespace mxl {

// Noise-whitened channel blocks W_k^{-1/2} H_k, each N x M.
struct EffectiveChannel {
  std::vector<CMatrix> blocks;

  int num_blocks() const { return static_cast<int>(blocks.size()); }
};

struct RateShaper {
  enum class Kind { none, soft_target, linear };

  Kind kind = Kind::none;
  double target_rate = 0.0;  // nats per channel use
  double tolerance = 0.0;    // watts per nat
  double slope = 0.0;        // watts per nat

  static RateShaper none() { return {}; }

  // phi(R) = -tolerance * max(target - R, 0)
  static RateShaper soft_target(double target, double tolerance) {
    if (!(target >= 0.0) || !(tolerance >= 0.0))
      throw InvalidInput("soft_target: target and tolerance must be nonnegative");
    return {Kind::soft_target, target, tolerance, 0.0};
  }

  static RateShaper linear(double slope) {
    if (!(slope >= 0.0)) throw InvalidInput("linear shaper: slope must be nonnegative");
    return {Kind::linear, 0.0, 0.0, slope};
  }
};

inline const char* to_string(RateShaper::Kind k) {
  switch (k) {
    case RateShaper::Kind::soft_target: return "soft_target";
    case RateShaper::Kind::linear: return "linear";
    default: return "none";
  }
}

struct GradientMatrix {
  BlockDiagHermitian blocks;
};

namespace detail {

inline void check_shapes(const EffectiveChannel& h, const BlockDiagHermitian& q) {
  if (h.blocks.size() != q.blocks.size())
    throw ShapeError("effective channel has " + std::to_string(h.blocks.size()) + " blocks, profile has " +
                     std::to_string(q.blocks.size()));
  for (std::size_t k = 0; k < h.blocks.size(); ++k)
    if (h.blocks[k].cols() != q.blocks[k].dim())
      throw ShapeError("subcarrier " + std::to_string(k) + ": channel has " + std::to_string(h.blocks[k].cols()) +
                       " inputs, profile block is " + std::to_string(q.blocks[k].dim()) + "x" +
                       std::to_string(q.blocks[k].dim()));
}

// S = I + H Q H^H for one subcarrier, factored.
struct SubcarrierTerms {
  double log_det = 0.0;
  CMatrix rate_gradient;  // H^H S^{-1} H
};

inline SubcarrierTerms subcarrier_terms(const CMatrix& h, const HermitianMatrix& q, bool with_gradient) {
  const Eigen::Index n = h.rows();
  CMatrix s = CMatrix::Identity(n, n) + h * q.matrix() * h.adjoint();
  Eigen::LLT<CMatrix> llt(s);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("I + H Q H^H is not positive definite");
  SubcarrierTerms t;
  const CMatrix& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < n; ++i) t.log_det += 2.0 * std::log(l(i, i).real());
  if (with_gradient) {
    CMatrix x = llt.matrixL().solve(h);
    t.rate_gradient = x.adjoint() * x;
  }
  return t;
}

}  // namespace detail

// R(Q) = sum_k log det(I + H_k Q_k H_k^H), natural log.
inline double achievable_rate(const EffectiveChannel& h, const BlockDiagHermitian& q) {
  detail::check_shapes(h, q);
  double r = 0.0;
  for (std::size_t k = 0; k < h.blocks.size(); ++k) r += detail::subcarrier_terms(h.blocks[k], q.blocks[k], false).log_det;
  return r;
}

inline double achievable_rate(const EffectiveChannel& h, const PowerProfile& q) {
  return achievable_rate(h, q.blocks());
}

inline double rate_to_bps(double rate_nats, double subcarrier_bw_hz) {
  return subcarrier_bw_hz * rate_nats / std::numbers::ln2;
}

inline double bps_to_rate(double bps, double subcarrier_bw_hz) {
  return bps * std::numbers::ln2 / subcarrier_bw_hz;
}

inline double shaper_value(const RateShaper& phi, double rate) {
  switch (phi.kind) {
    case RateShaper::Kind::soft_target: return -phi.tolerance * std::max(phi.target_rate - rate, 0.0);
    case RateShaper::Kind::linear: return phi.slope * rate;
    default: return 0.0;
  }
}

// A supergradient of phi at rate. At the kink of the soft target the
// tolerance (left derivative) is returned.
inline double shaper_slope(const RateShaper& phi, double rate) {
  switch (phi.kind) {
    case RateShaper::Kind::soft_target: return rate <= phi.target_rate ? phi.tolerance : 0.0;
    case RateShaper::Kind::linear: return phi.slope;
    default: return 0.0;
  }
}

inline double loss(const BlockDiagHermitian& q, const EffectiveChannel& h, const RateShaper& phi) {
  return q.trace() - shaper_value(phi, achievable_rate(h, q));
}

inline double loss(const PowerProfile& q, const EffectiveChannel& h, const RateShaper& phi) {
  return loss(q.blocks(), h, phi);
}

struct LossEvaluation {
  double rate = 0.0;
  double loss = 0.0;
  GradientMatrix gradient;
};

// Rate, loss and V = I - phi'(R) H^H (I + H Q H^H)^{-1} H in one pass.
inline LossEvaluation evaluate_loss(const BlockDiagHermitian& q, const EffectiveChannel& h, const RateShaper& phi) {
  detail::check_shapes(h, q);
  LossEvaluation out;
  std::vector<CMatrix> rate_grads;
  rate_grads.reserve(h.blocks.size());
  for (std::size_t k = 0; k < h.blocks.size(); ++k) {
    auto t = detail::subcarrier_terms(h.blocks[k], q.blocks[k], true);
    out.rate += t.log_det;
    rate_grads.push_back(std::move(t.rate_gradient));
  }
  out.loss = q.trace() - shaper_value(phi, out.rate);
  const double slope = shaper_slope(phi, out.rate);
  out.gradient.blocks.blocks.reserve(h.blocks.size());
  for (std::size_t k = 0; k < h.blocks.size(); ++k) {
    const Eigen::Index m = q.blocks[k].dim();
    out.gradient.blocks.blocks.emplace_back(CMatrix(CMatrix::Identity(m, m) - slope * rate_grads[k]));
  }
  return out;
}

inline LossEvaluation evaluate_loss(const PowerProfile& q, const EffectiveChannel& h, const RateShaper& phi) {
  return evaluate_loss(q.blocks(), h, phi);
}

inline GradientMatrix loss_gradient(const PowerProfile& q, const EffectiveChannel& h, const RateShaper& phi) {
  return evaluate_loss(q, h, phi).gradient;
}

inline constexpr double kGradientSafetyFactor = 1.2;

// Upper estimate of sup ||V||: largest observed spectral norm times the safety factor.
inline double gradient_norm_estimate(std::span<const GradientMatrix> samples) {
  if (samples.empty()) throw InvalidInput("gradient_norm_estimate: no samples");
  double top = 0.0;
  for (const auto& v : samples) top = std::max(top, spectral_norm(v.blocks));
  return kGradientSafetyFactor * top;
}

}  // namespace mxl
