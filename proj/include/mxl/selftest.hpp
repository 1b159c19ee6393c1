#pragma once

// Property suites over every module, each against an oracle that does not
// share code with the kernel it checks (series exponential, power iteration,
// finite differences, grid search). Used by `mxlsim selftest` and by the
// acceptance harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "mxl/channel.hpp"
#include "mxl/hermlin.hpp"
#include "mxl/hindsight.hpp"
#include "mxl/learner.hpp"
#include "mxl/objective.hpp"

namespace mxl::selftest {

struct Check {
  std::string name;
  bool passed = true;
  double worst = 0.0;      // largest observed error (or violation margin)
  double tolerance = 0.0;
  int samples = 0;
};

// ---- random instances ------------------------------------------------------

inline CMatrix random_complex(Rng& rng, int rows, int cols, double scale = 1.0) {
  return complex_gaussian(rng, rows, cols, scale * scale);
}

inline HermitianMatrix random_hermitian(Rng& rng, int dim, double scale = 1.0) {
  const CMatrix a = random_complex(rng, dim, dim, scale);
  return HermitianMatrix(CMatrix(a + a.adjoint()) * 0.5);
}

inline HermitianMatrix random_pd(Rng& rng, int dim, double floor = 0.1) {
  const CMatrix b = random_complex(rng, dim, dim);
  return HermitianMatrix(CMatrix(b * b.adjoint() + floor * CMatrix::Identity(dim, dim)));
}

inline BlockDiagHermitian random_blocks(Rng& rng, int k, int m, double scale = 1.0) {
  BlockDiagHermitian out;
  for (int i = 0; i < k; ++i) out.blocks.push_back(random_hermitian(rng, m, scale));
  return out;
}

// Strictly interior point of X.
inline PowerProfile random_profile(Rng& rng, int k, int m, double pmax, double scale = 1.0) {
  return logit_map(random_blocks(rng, k, m, scale), pmax);
}

inline EffectiveChannel random_channel(Rng& rng, int k, int n, int m, double scale = 1.0) {
  EffectiveChannel h;
  for (int i = 0; i < k; ++i) h.blocks.push_back(random_complex(rng, n, m, scale));
  return h;
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Real orthonormal coordinates of the Hermitian matrices of size m: the
// diagonal units, then (E_ij + E_ji) and i(E_ij - E_ji) for i < j.
inline std::vector<CMatrix> hermitian_directions(int m) {
  std::vector<CMatrix> dirs;
  for (int i = 0; i < m; ++i) {
    CMatrix d = CMatrix::Zero(m, m);
    d(i, i) = 1.0;
    dirs.push_back(d);
  }
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      CMatrix re = CMatrix::Zero(m, m);
      re(i, j) = re(j, i) = 1.0;
      dirs.push_back(re);
      CMatrix im = CMatrix::Zero(m, m);
      im(i, j) = cplx(0.0, 1.0);
      im(j, i) = cplx(0.0, -1.0);
      dirs.push_back(im);
    }
  return dirs;
}

// ---- oracles ---------------------------------------------------------------

// Taylor series with scaling and squaring; no eigendecomposition involved.
inline CMatrix series_exp(const CMatrix& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const CMatrix b = a / std::ldexp(1.0, squarings);
  CMatrix term = CMatrix::Identity(a.rows(), a.cols());
  CMatrix sum = term;
  for (int i = 1; i < 40; ++i) {
    term = term * b / static_cast<double>(i);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

// sqrt of the dominant eigenvalue of A^2 by power iteration.
inline double power_iteration_norm(const CMatrix& a, int iterations = 5000) {
  const CMatrix a2 = a * a;
  Eigen::Matrix<cplx, Eigen::Dynamic, 1> v(a.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cplx(1.0 + 0.1 * static_cast<double>(i), 0.3);
  double lambda = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const Eigen::Matrix<cplx, Eigen::Dynamic, 1> w = a2 * v;
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    lambda = v.dot(w).real() / v.squaredNorm();
    v = w / n;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

// Minimizer over p in [0, pmax] of sum_n p - phi_n(log(1 + g_n p)) on a grid.
inline double scalar_grid_minimizer(const std::vector<double>& gains, const std::vector<RateShaper>& shapers, double pmax,
                                    int points = 200001) {
  double best_p = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) {
    const double p = pmax * static_cast<double>(i) / (points - 1);
    double f = 0.0;
    for (std::size_t n = 0; n < gains.size(); ++n) f += p - shaper_value(shapers[n], std::log1p(gains[n] * p));
    if (f < best) {
      best = f;
      best_p = p;
    }
  }
  return best_p;
}

namespace detail {

inline std::string g6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

inline Check finish(Check c) {
  c.passed = c.worst <= c.tolerance;
  return c;
}

}  // namespace detail

// ---- hermlin ---------------------------------------------------------------

inline Check exp_vs_series(Rng& rng, int samples = 200, double tol = 1e-10) {
  Check c{"herm_exp matches the series oracle", true, 0.0, tol, samples};
  for (int s = 0; s < samples; ++s) {
    const auto a = random_hermitian(rng, uniform_int(rng, 1, 4), uniform(rng, 0.1, 2.0));
    const CMatrix ref = series_exp(a.matrix());
    c.worst = std::max(c.worst, (herm_exp(a).matrix() - ref).norm() / ref.norm());
  }
  return detail::finish(c);
}

inline Check inv_sqrt_definition(Rng& rng, int samples = 200, double tol = 1e-9) {
  Check c{"inv_sqrt satisfies S W S = I", true, 0.0, tol, samples};
  for (int s = 0; s < samples; ++s) {
    const int m = uniform_int(rng, 1, 4);
    const auto w = random_pd(rng, m, uniform(rng, 0.05, 1.0));
    const CMatrix sws = inv_sqrt(w).matrix() * w.matrix() * inv_sqrt(w).matrix();
    c.worst = std::max(c.worst, (sws - CMatrix::Identity(m, m)).norm());
  }
  return detail::finish(c);
}

inline Check eig_reconstruction(Rng& rng, int samples = 200, double tol = 1e-10) {
  Check c{"eigendecomposition reconstructs its input", true, 0.0, tol, samples};
  for (int s = 0; s < samples; ++s) {
    const int m = uniform_int(rng, 1, 6);
    const auto a = random_hermitian(rng, m, uniform(rng, 0.1, 10.0));
    const auto e = herm_eig(a);
    const CMatrix rec = e.vectors * e.values.cast<cplx>().asDiagonal() * e.vectors.adjoint();
    const double scale = std::max(a.matrix().norm(), 1e-300);
    c.worst = std::max(c.worst, (rec - a.matrix()).norm() / scale);
    c.worst = std::max(c.worst, (e.vectors.adjoint() * e.vectors - CMatrix::Identity(m, m)).norm());
    for (Eigen::Index i = 1; i < e.values.size(); ++i)
      if (e.values(i) > e.values(i - 1)) c.worst = std::max(c.worst, 1.0);
  }
  return detail::finish(c);
}

inline Check spectral_norm_vs_power_iteration(Rng& rng, int samples = 100, double tol = 1e-8) {
  Check c{"spectral_norm matches power iteration", true, 0.0, tol, samples};
  for (int s = 0; s < samples; ++s) {
    const auto a = random_hermitian(rng, uniform_int(rng, 1, 4));
    const double ref = power_iteration_norm(a.matrix());
    c.worst = std::max(c.worst, std::abs(spectral_norm(a) - ref) / std::max(ref, 1e-300));
  }
  return detail::finish(c);
}

// Q = pmax grad_U log(1 + tr e^U) by central differences in every coordinate.
inline Check mirror_identity(Rng& rng, int samples = 50, double tol = 1e-6) {
  Check c{"logit map is the gradient of pmax log(1 + tr e^U)", true, 0.0, tol, samples};
  const auto dirs = hermitian_directions(3);
  for (int s = 0; s < samples; ++s) {
    const double pmax = uniform(rng, 0.5, 5.0);
    const auto u = random_hermitian(rng, 3, uniform(rng, 0.2, 3.0));
    const auto q = logit_map(BlockDiagHermitian({u}), pmax);
    const double h = 1e-5;
    double num = 0.0;
    double den = 0.0;
    for (const auto& d : dirs) {
      const HermitianMatrix hd(CMatrix(d * h));
      const double fp = log_one_plus_trace_exp(BlockDiagHermitian({u + hd}));
      const double fm = log_one_plus_trace_exp(BlockDiagHermitian({u - hd}));
      const double fd = pmax * (fp - fm) / (2.0 * h);
      const double exact = trace_product(q[0], HermitianMatrix(d));
      num += (fd - exact) * (fd - exact);
      den += exact * exact;
    }
    c.worst = std::max(c.worst, std::sqrt(num / den));
  }
  return detail::finish(c);
}

// nuclear(Q1 - Q2) <= c * spectral(U1 - U2) for independent pairs with
// ||U|| <= 10; c defaults to pmax / 2.
inline Check logit_lipschitz(Rng& rng, int samples = 1000, double constant_over_pmax = 0.5) {
  Check c{"logit map is " + detail::g6(constant_over_pmax) + " pmax-Lipschitz (spectral to nuclear)", true,
          -std::numeric_limits<double>::infinity(), 0.0, samples};
  for (int s = 0; s < samples; ++s) {
    const int k = uniform_int(rng, 1, 3);
    const int m = uniform_int(rng, 1, 3);
    const double pmax = uniform(rng, 0.1, 10.0);
    auto draw = [&] {
      auto u = random_blocks(rng, k, m);
      const double n = spectral_norm(u);
      return n > 0.0 ? u * (uniform(rng, 0.0, 10.0) / n) : u;
    };
    const auto u1 = draw();
    const auto u2 = draw();
    const double lhs = nuclear_norm(logit_map(u1, pmax).blocks() - logit_map(u2, pmax).blocks());
    const double rhs = constant_over_pmax * pmax * spectral_norm(u1 - u2);
    // Relative margin; positive means a violation.
    c.worst = std::max(c.worst, (lhs - rhs) / std::max(rhs, 1e-300) - 1e-12);
  }
  return detail::finish(c);
}

// Ratio nuclear(Q1 - Q2) / (pmax spectral(U1 - U2)) for the nearly saturated
// pair U1 = diag(L + e, L - e), U2 = L I. Tends to 1 as L grows and e shrinks.
inline double logit_lipschitz_ratio_near_boundary(double level = 30.0, double eps = 1e-4) {
  const BlockDiagHermitian u1({HermitianMatrix::diagonal({level + eps, level - eps})});
  const BlockDiagHermitian u2({HermitianMatrix::identity(2, level)});
  return nuclear_norm(logit_map(u1, 1.0).blocks() - logit_map(u2, 1.0).blocks()) / spectral_norm(u1 - u2);
}

// Strict interiority is representable while the largest exponent stays
// below about 36 (beyond that 1 + tr e^U rounds to tr e^U).
inline Check logit_feasibility(Rng& rng, int samples = 500) {
  Check c{"logit map lands strictly inside the feasible set", true, -std::numeric_limits<double>::infinity(), 0.0, samples};
  for (int s = 0; s < samples; ++s) {
    const double pmax = uniform(rng, 0.1, 100.0);
    const auto q = logit_map(random_blocks(rng, uniform_int(rng, 1, 8), uniform_int(rng, 1, 3), uniform(rng, 0.1, 6.0)), pmax);
    double low = std::numeric_limits<double>::infinity();
    for (const auto& b : q.blocks().blocks) low = std::min(low, lambda_min(b));
    // Violations: nonpositive eigenvalue or trace not below pmax.
    c.worst = std::max(c.worst, std::max(low > 0.0 ? -1.0 : 1.0, q.trace() < pmax ? -1.0 : 1.0));
  }
  return detail::finish(c);
}

// ---- objective -------------------------------------------------------------

// Central differences of the loss over all real coordinates of Q, step
// 1e-5 pmax, compared with tr[V D]. Shapers are chosen away from the kink.
inline Check gradient_finite_differences(Rng& rng, int samples = 100, double tol = 1e-5) {
  Check c{"loss gradient matches central finite differences", true, 0.0, tol, samples};
  for (int s = 0; s < samples; ++s) {
    const int k = uniform_int(rng, 1, 4);
    const int m = uniform_int(rng, 1, 3);
    const int n = uniform_int(rng, 1, 3);
    const double pmax = uniform(rng, 0.5, 5.0);
    const auto q = random_profile(rng, k, m, pmax, 0.5);
    const auto h = random_channel(rng, k, n, m, uniform(rng, 0.3, 3.0));
    const double r = achievable_rate(h, q);
    const bool below = s % 4 != 0;
    const RateShaper phi = RateShaper::soft_target(below ? r * uniform(rng, 1.2, 2.0) + 0.1 : r * uniform(rng, 0.3, 0.8),
                                                   uniform(rng, 0.2, 3.0) * pmax / std::max(r, 0.1));
    const auto v = loss_gradient(q, h, phi);
    const double step = 1e-5 * pmax;
    const auto dirs = hermitian_directions(m);
    double num = 0.0;
    double den = 0.0;
    for (int b = 0; b < k; ++b)
      for (const auto& d : dirs) {
        auto plus = q.blocks();
        auto minus = q.blocks();
        plus[static_cast<std::size_t>(b)] += HermitianMatrix(CMatrix(d * step));
        minus[static_cast<std::size_t>(b)] -= HermitianMatrix(CMatrix(d * step));
        const double fd = (loss(plus, h, phi) - loss(minus, h, phi)) / (2.0 * step);
        const double exact = trace_product(v.blocks[static_cast<std::size_t>(b)], HermitianMatrix(d));
        num += (fd - exact) * (fd - exact);
        den += exact * exact;
      }
    c.worst = std::max(c.worst, std::sqrt(num / std::max(den, 1e-300)));
  }
  return detail::finish(c);
}

inline Check rate_concavity(Rng& rng, int samples = 200, double tol = 1e-10) {
  Check c{"achievable rate is concave", true, -std::numeric_limits<double>::infinity(), tol, samples};
  for (int s = 0; s < samples; ++s) {
    const int k = uniform_int(rng, 1, 4);
    const int m = uniform_int(rng, 1, 3);
    const auto h = random_channel(rng, k, uniform_int(rng, 1, 3), m, uniform(rng, 0.3, 3.0));
    const auto q1 = random_profile(rng, k, m, 2.0);
    const auto q2 = random_profile(rng, k, m, 2.0);
    const double t = uniform(rng, 0.0, 1.0);
    const auto mix = q1.blocks() * t + q2.blocks() * (1.0 - t);
    const double gap = t * achievable_rate(h, q1) + (1.0 - t) * achievable_rate(h, q2) - achievable_rate(h, mix);
    c.worst = std::max(c.worst, gap);
  }
  return detail::finish(c);
}

// L(Q') >= L(Q) + tr[(Q' - Q) V(Q)] off the kink.
inline Check subgradient_inequality(Rng& rng, int samples = 200, double tol = 1e-9) {
  Check c{"loss gradient is a subgradient", true, -std::numeric_limits<double>::infinity(), tol, samples};
  for (int s = 0; s < samples; ++s) {
    const int k = uniform_int(rng, 1, 4);
    const int m = uniform_int(rng, 1, 3);
    const auto h = random_channel(rng, k, uniform_int(rng, 1, 3), m, uniform(rng, 0.3, 3.0));
    const auto q = random_profile(rng, k, m, 1.0);
    const auto q2 = random_profile(rng, k, m, 1.0);
    const double r = achievable_rate(h, q);
    const double target = std::max(r * uniform(rng, 0.5, 2.0) + (s % 2 ? 0.05 : -0.05), 0.0);
    const RateShaper phi = RateShaper::soft_target(target, uniform(rng, 0.1, 3.0));
    const auto v = loss_gradient(q, h, phi);
    const double lower = loss(q, h, phi) + trace_product(q2.blocks() - q.blocks(), v.blocks);
    c.worst = std::max(c.worst, lower - loss(q2, h, phi));
  }
  return detail::finish(c);
}

// ---- learner ---------------------------------------------------------------

inline Check learner_invariants(Rng& rng, int samples = 20) {
  Check c{"learner stays feasible, Y is the exact negative gradient sum, eta/V scale coupling", true, 0.0, 1e-12, samples};
  for (int s = 0; s < samples; ++s) {
    const int k = uniform_int(rng, 1, 4);
    const int m = uniform_int(rng, 1, 3);
    const double pmax = uniform(rng, 0.5, 20.0);
    const double eta = uniform(rng, 0.1, 3.0);
    const double scale = uniform(rng, 0.1, 10.0);
    LearnerState a(k, m, eta, pmax);
    LearnerState b(k, m, eta / scale, pmax);
    BlockDiagHermitian sum = BlockDiagHermitian::zero(k, m);
    for (int n = 0; n < 60; ++n) {
      const auto v = random_blocks(rng, k, m, uniform(rng, 0.1, 5.0));
      sum += v;
      a.update(GradientMatrix{v});
      b.update(GradientMatrix{v * scale});
      double low = std::numeric_limits<double>::infinity();
      for (const auto& blk : a.profile().blocks().blocks) low = std::min(low, lambda_min(blk));
      if (!(low > 0.0) || !(a.profile().trace() < pmax)) c.worst = std::max(c.worst, 1.0);
      double drift = 0.0;
      for (std::size_t i = 0; i < sum.blocks.size(); ++i)
        drift = std::max(drift, (a.score()[i].matrix() + sum[i].matrix()).cwiseAbs().maxCoeff());
      c.worst = std::max(c.worst, drift);
      // Scaling V by c and eta by 1/c agrees up to rounding of the product.
      const double diff = nuclear_norm(a.profile().blocks() - b.profile().blocks()) / pmax;
      if (diff > 1e-10) c.worst = std::max(c.worst, diff);
    }
  }
  return detail::finish(c);
}

// ---- hindsight -------------------------------------------------------------

inline Check fenchel_inequality(Rng& rng, int samples = 1000, double tol = 1e-10) {
  Check c{"Fenchel-type trace inequality holds", true, -std::numeric_limits<double>::infinity(), tol, samples};
  for (int s = 0; s < samples; ++s) {
    const int m = uniform_int(rng, 1, 4);
    const auto x = random_hermitian(rng, m, uniform(rng, 0.1, 3.0));
    const CMatrix b = random_complex(rng, m, m);
    CMatrix a = b * b.adjoint();
    a *= uniform(rng, 0.0, 1.0) / a.trace().real();
    c.worst = std::max(c.worst, -fenchel_gap(HermitianMatrix(a), x));
  }
  return detail::finish(c);
}

inline Check fenchel_equality(Rng& rng, int samples = 1000, double tol = 1e-9) {
  Check c{"Fenchel gap vanishes at the logit choice", true, 0.0, tol, samples};
  for (int s = 0; s < samples; ++s) {
    const auto x = random_hermitian(rng, uniform_int(rng, 1, 4), uniform(rng, 0.1, 3.0));
    const auto a = logit_map(BlockDiagHermitian({x}), 1.0);
    c.worst = std::max(c.worst, std::abs(fenchel_gap(a[0], x)));
  }
  return detail::finish(c);
}

inline Check entropy_bound(Rng& rng, int samples = 1000, double tol = 1e-12) {
  Check c{"augmented entropy is at most log(1 + KM)", true, -std::numeric_limits<double>::infinity(), tol, samples};
  for (int s = 0; s < samples; ++s) {
    const int k = uniform_int(rng, 1, 8);
    const int m = uniform_int(rng, 1, 3);
    const double pmax = uniform(rng, 0.1, 50.0);
    PowerProfile q;
    if (s % 2) {
      q = random_profile(rng, k, m, pmax, uniform(rng, 0.0, 3.0));
    } else {
      BlockDiagHermitian raw;
      for (int i = 0; i < k; ++i) {
        const CMatrix b = random_complex(rng, m, m);
        raw.blocks.emplace_back(CMatrix(b * b.adjoint()));
      }
      q = PowerProfile(raw * (uniform(rng, 0.01, 0.999) * pmax / raw.trace()), pmax);
    }
    c.worst = std::max(c.worst, augmented_entropy(q) - std::log1p(static_cast<double>(k * m)));
  }
  return detail::finish(c);
}

inline Check projection_properties(Rng& rng, int samples = 300, double tol = 1e-10) {
  Check c{"projection onto X is idempotent and nonexpansive", true, 0.0, tol, samples};
  for (int s = 0; s < samples; ++s) {
    const int k = uniform_int(rng, 1, 4);
    const int m = uniform_int(rng, 1, 3);
    const double pmax = uniform(rng, 0.5, 5.0);
    const auto x1 = random_blocks(rng, k, m, uniform(rng, 0.1, 3.0));
    const auto x2 = random_blocks(rng, k, m, uniform(rng, 0.1, 3.0));
    const auto p1 = project_feasible(x1, pmax);
    const auto p2 = project_feasible(x2, pmax);
    const auto again = project_feasible(p1.blocks(), pmax);
    double idem = 0.0;
    double d_out = 0.0;
    double d_in = 0.0;
    for (std::size_t i = 0; i < x1.blocks.size(); ++i) {
      idem = std::max(idem, (again[i].matrix() - p1[i].matrix()).norm());
      d_out += (p1[i].matrix() - p2[i].matrix()).squaredNorm();
      d_in += (x1[i].matrix() - x2[i].matrix()).squaredNorm();
    }
    c.worst = std::max({c.worst, idem, std::sqrt(d_out) - std::sqrt(d_in)});
    if (p1.trace() > pmax * (1.0 + 1e-12)) c.worst = std::max(c.worst, 1.0);
  }
  return detail::finish(c);
}

// Scalar histories (K = M = N = 1): the hindsight optimum agrees with a grid
// search over [0, pmax] to 1e-3 W.
inline Check hindsight_vs_grid(Rng& rng, int samples = 10, double tol = 1e-3) {
  Check c{"hindsight solver matches a grid search on scalar histories", true, 0.0, tol, samples};
  for (int s = 0; s < samples; ++s) {
    const double pmax = 1.0;
    const int frames = uniform_int(rng, 1, 6);
    LossHistory hist;
    std::vector<double> gains;
    std::vector<RateShaper> shapers;
    for (int n = 0; n < frames; ++n) {
      const double g = uniform(rng, 0.5, 20.0);
      const double target = std::log1p(g * uniform(rng, 0.1, 0.9));
      const RateShaper phi = RateShaper::soft_target(target, uniform(rng, 0.2, 4.0));
      EffectiveChannel h;
      const double phase = uniform(rng, 0.0, 6.283185307179586);
      CMatrix hm(1, 1);
      hm(0, 0) = std::polar(std::sqrt(g), phase);
      h.blocks.push_back(hm);
      const auto q = PowerProfile(BlockDiagHermitian({HermitianMatrix::identity(1, uniform(rng, 0.0, pmax))}), pmax);
      hist.frames.push_back({h, phi, q, loss(q, h, phi)});
      gains.push_back(g);
      shapers.push_back(phi);
    }
    const double grid = scalar_grid_minimizer(gains, shapers, pmax);
    const auto sol = best_fixed_profile(hist);
    c.worst = std::max(c.worst, std::abs(sol.q_star.trace() - grid));
  }
  return detail::finish(c);
}

// ---- channel ---------------------------------------------------------------

// Speeds up to 150 km/h keep the alternating series well conditioned.
inline Check jakes_series(int samples = 200, double tol = 1e-10) {
  Check c{"Jakes correlation matches the Bessel series", true, 0.0, tol, samples};
  for (int s = 0; s < samples; ++s) {
    const double speed = 150.0 * s / samples;
    const double x = 2.0 * std::numbers::pi * doppler_hz(speed, 2.5e9) * 0.005;
    double term = 1.0;
    double sum = 1.0;
    for (int i = 1; i < 80; ++i) {
      term *= -(x * x / 4.0) / (static_cast<double>(i) * i);
      sum += term;
    }
    c.worst = std::max(c.worst, std::abs(jakes_correlation(speed, 2.5e9, 0.005) - std::clamp(sum, 0.0, 1.0)));
  }
  return detail::finish(c);
}

inline std::vector<Check> run_all(std::uint64_t seed = 20240601) {
  Rng rng(seed);
  std::vector<Check> out;
  out.push_back(exp_vs_series(rng));
  out.push_back(inv_sqrt_definition(rng));
  out.push_back(eig_reconstruction(rng));
  out.push_back(spectral_norm_vs_power_iteration(rng));
  out.push_back(mirror_identity(rng));
  out.push_back(logit_lipschitz(rng, 1000, 1.0));
  out.push_back(logit_feasibility(rng));
  out.push_back(gradient_finite_differences(rng));
  out.push_back(rate_concavity(rng));
  out.push_back(subgradient_inequality(rng));
  out.push_back(learner_invariants(rng));
  out.push_back(fenchel_inequality(rng));
  out.push_back(fenchel_equality(rng));
  out.push_back(entropy_bound(rng));
  out.push_back(projection_properties(rng));
  out.push_back(hindsight_vs_grid(rng));
  out.push_back(jakes_series());
  return out;
}

}  // namespace mxl::selftest
