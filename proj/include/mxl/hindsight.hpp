#pragma once

// Regret accounting. The best fixed profile in hindsight minimizes the summed
// loss over the feasible set X = {Q >= 0, tr Q <= pmax}. It is computed with
// Euclidean machinery (projection, Newton on a log-barrier) so that the
// auditor shares no code path with the exponential learner it checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "mxl/errors.hpp"
#include "mxl/hermlin.hpp"
#include "mxl/objective.hpp"

namespace mxl {

struct HistoryFrame {
  EffectiveChannel channel;
  RateShaper shaper;
  PowerProfile played;
  double loss = 0.0;
};

struct LossHistory {
  std::vector<HistoryFrame> frames;

  int size() const { return static_cast<int>(frames.size()); }
  bool empty() const { return frames.empty(); }
};

// Largest |recorded - recomputed| loss over the history.
inline double loss_consistency_error(const LossHistory& history) {
  double worst = 0.0;
  for (const auto& f : history.frames)
    worst = std::max(worst, std::abs(f.loss - loss(f.played, f.channel, f.shaper)));
  return worst;
}

// Frobenius-nearest point of X: clip eigenvalues at zero, then shift the
// positive ones down by a common theta (found by bisection) when the trace
// budget is exceeded.
inline PowerProfile project_feasible(const BlockDiagHermitian& raw, double pmax) {
  if (!(pmax > 0.0)) throw InvalidInput("project_feasible: pmax must be positive");
  if (raw.blocks.empty()) throw InvalidInput("project_feasible: empty input");
  std::vector<EigenDecomposition> eigs;
  eigs.reserve(raw.blocks.size());
  double clipped_trace = 0.0;
  double top = 0.0;
  for (const auto& b : raw.blocks) {
    eigs.push_back(herm_eig(b));
    for (Eigen::Index i = 0; i < eigs.back().values.size(); ++i) {
      clipped_trace += std::max(eigs.back().values(i), 0.0);
      top = std::max(top, eigs.back().values(i));
    }
  }
  double theta = 0.0;
  if (clipped_trace > pmax) {
    auto mass = [&](double th) {
      double s = 0.0;
      for (const auto& e : eigs)
        for (Eigen::Index i = 0; i < e.values.size(); ++i) s += std::max(e.values(i) - th, 0.0);
      return s;
    };
    double lo = 0.0;
    double hi = top;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (mass(mid) > pmax ? lo : hi) = mid;
    }
    theta = hi;
  }
  BlockDiagHermitian out;
  out.blocks.reserve(eigs.size());
  for (const auto& e : eigs) out.blocks.push_back(spectral_apply(e, [&](double x) { return std::max(x - theta, 0.0); }));
  // The bisection leaves the trace at most a few ulps above pmax.
  const double tr = out.trace();
  if (tr > pmax) out *= pmax / tr;
  return PowerProfile(std::move(out), pmax);
}

// Coordinates of Hermitian matrices in an orthonormal basis for Re tr(A B):
// diagonal entries, then sqrt(2) Re and sqrt(2) Im of each upper entry.
namespace hcoords {

inline int size(int dim) { return dim * dim; }

template <class Mat>
void to_coords(const Mat& x, double* out) {
  const int m = static_cast<int>(x.rows());
  int c = 0;
  for (int i = 0; i < m; ++i) out[c++] = x(i, i).real();
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      out[c++] = std::numbers::sqrt2 * x(i, j).real();
      out[c++] = std::numbers::sqrt2 * x(i, j).imag();
    }
}

template <class Mat = CMatrix>
Mat from_coords(const double* in, int m) {
  Mat x = Mat::Zero(m, m);
  int c = 0;
  for (int i = 0; i < m; ++i) x(i, i) = in[c++];
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const cplx v(in[c] / std::numbers::sqrt2, in[c + 1] / std::numbers::sqrt2);
      c += 2;
      x(i, j) = v;
      x(j, i) = std::conj(v);
    }
  return x;
}

template <class Mat = CMatrix>
std::vector<Mat> basis(int m) {
  std::vector<Mat> out;
  std::vector<double> e(static_cast<std::size_t>(m * m), 0.0);
  for (int i = 0; i < m * m; ++i) {
    std::fill(e.begin(), e.end(), 0.0);
    e[static_cast<std::size_t>(i)] = 1.0;
    out.push_back(from_coords<Mat>(e.data(), m));
  }
  return out;
}

}  // namespace hcoords

struct HindsightOptions {
  enum class Method { barrier, projected_subgradient };

  Method method = Method::barrier;
  // barrier: stop once the duality gap bound m/t falls below
  // relative_gap * (1 + |F|).
  double relative_gap = 1e-10;
  double barrier_growth = 10.0;
  int max_newton_steps = 2000;
  // projected subgradient
  int max_iterations = 2000;
  double min_relative_improvement = 1e-9;
};

struct HindsightSolution {
  PowerProfile q_star;
  double cumulative_loss = 0.0;
  // Upper bound on cumulative_loss - min F (barrier only; NaN otherwise).
  double gap_bound = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
};

namespace detail {

// Newton log-barrier method for min sum_n [tr Q - phi_n(R_n(Q))] over X.
// Soft-target frames use an epigraph slack s_n >= R* - R_n, s_n >= 0 that is
// eliminated in closed form. Each frame only enters through the Gram
// matrices G_k = H_k^H H_k: R = sum_k log det(I + G_k Q_k) and
// dR/dQ_k = (I + G_k Q_k)^{-1} G_k.
template <int M>
class BarrierSolver {
  using Mat = std::conditional_t<M == Eigen::Dynamic, CMatrix, Eigen::Matrix<cplx, M, M>>;

 public:
  BarrierSolver(const LossHistory& history, int count, int num_blocks, int dim, double pmax)
      : k_(num_blocks), m_(dim), pmax_(pmax), basis_(hcoords::basis<Mat>(dim)) {
    per_ = hcoords::size(m_);
    d_ = k_ * per_;
    frames_.reserve(static_cast<std::size_t>(count));
    gram_.reserve(static_cast<std::size_t>(count * k_));
    for (int n = 0; n < count; ++n) {
      const auto& f = history.frames[static_cast<std::size_t>(n)];
      frames_.push_back(f.shaper);
      for (const auto& h : f.channel.blocks) {
        if (h.cols() != m_) throw ShapeError("best_fixed_profile: channel and profile dimensions differ");
        gram_.push_back(Mat(h.adjoint() * h));
      }
      if (static_cast<int>(f.channel.blocks.size()) != k_)
        throw ShapeError("best_fixed_profile: channel and profile block counts differ");
      if (soft(f.shaper)) ++n_soft_;
    }
    constraints_ = 2.0 * n_soft_ + k_ * m_ + 1.0;
  }

  struct Result {
    BlockDiagHermitian q;
    double objective = 0.0;
    double gap_bound = 0.0;
    int newton_steps = 0;
  };

  Result solve(const HindsightOptions& opt) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d_);
    for (int k = 0; k < k_; ++k)
      for (int i = 0; i < m_; ++i) x(k * per_ + i) = pmax_ / (2.0 * k_ * m_);
    const double f_start = objective(x);
    const double scale = static_cast<double>(frames_.size()) * pmax_ + std::abs(f_start);
    double t = constraints_ / scale;
    int steps = 0;
    for (int outer = 0; outer < 200; ++outer) {
      steps += center(x, t, opt.max_newton_steps - steps);
      const double gap = constraints_ / t;
      if (gap <= opt.relative_gap * (1.0 + std::abs(objective(x))) || steps >= opt.max_newton_steps) break;
      t *= opt.barrier_growth;
    }
    Result r;
    for (int k = 0; k < k_; ++k) r.q.blocks.emplace_back(CMatrix(hcoords::from_coords<Mat>(x.data() + k * per_, m_)));
    r.objective = objective(x);
    r.gap_bound = constraints_ / t;
    r.newton_steps = steps;
    return r;
  }

  // F(Q) at coordinates x.
  double objective(const Eigen::VectorXd& x) const {
    const auto q = blocks(x);
    double f = 0.0;
    double tr = 0.0;
    for (const auto& b : q) tr += b.trace().real();
    for (std::size_t n = 0; n < frames_.size(); ++n) {
      f += tr;
      const RateShaper& phi = frames_[n];
      if (phi.kind != RateShaper::Kind::none) f -= shaper_value(phi, rate(n, q));
    }
    return f;
  }

 private:
  static bool soft(const RateShaper& phi) {
    return phi.kind == RateShaper::Kind::soft_target && phi.tolerance > 0.0;
  }

  std::vector<Mat> blocks(const Eigen::VectorXd& x) const {
    std::vector<Mat> q;
    q.reserve(static_cast<std::size_t>(k_));
    for (int k = 0; k < k_; ++k) q.push_back(hcoords::from_coords<Mat>(x.data() + k * per_, m_));
    return q;
  }

  const Mat& gram(std::size_t n, int k) const { return gram_[n * static_cast<std::size_t>(k_) + static_cast<std::size_t>(k)]; }

  double rate(std::size_t n, const std::vector<Mat>& q) const {
    double r = 0.0;
    for (int k = 0; k < k_; ++k) {
      const Mat s = Mat::Identity(m_, m_) + gram(n, k) * q[static_cast<std::size_t>(k)];
      r += std::log(s.determinant().real());
    }
    return r;
  }

  // Slack elimination for one soft-target frame:
  // psi(a) = min_s [c s - log(s - a) - log s], c = t * lambda.
  struct Slack {
    double s, u;  // s and s - a at the minimizer
  };
  static double root(double c, double a) {
    // positive root of c s^2 - (c a + 2) s + a = 0, cancellation-free
    const double b = c * a + 2.0;
    const double disc = std::sqrt(c * c * a * a + 4.0);
    return b >= 0.0 ? (b + disc) / (2.0 * c) : 2.0 * a / (b - disc);
  }
  static Slack slack(double c, double a) { return {root(c, a), root(c, -a)}; }

  // Barrier value; +inf outside the domain.
  double barrier_value(const Eigen::VectorXd& x, double t) const {
    const auto q = blocks(x);
    double tr = 0.0;
    for (const auto& b : q) tr += b.trace().real();
    if (!(tr < pmax_)) return std::numeric_limits<double>::infinity();
    double v = -std::log(pmax_ - tr);
    for (const auto& b : q) {
      Eigen::LLT<Mat> llt(b);
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      const auto& l = llt.matrixLLT();
      for (int i = 0; i < m_; ++i) {
        const double p = l(i, i).real();
        if (!(p > 0.0) || !std::isfinite(p)) return std::numeric_limits<double>::infinity();
        v -= 2.0 * std::log(p);
      }
    }
    v += t * tr * static_cast<double>(frames_.size());
    for (std::size_t n = 0; n < frames_.size(); ++n) {
      const RateShaper& phi = frames_[n];
      if (phi.kind == RateShaper::Kind::linear) {
        v -= t * phi.slope * rate(n, q);
      } else if (soft(phi)) {
        const double c = t * phi.tolerance;
        const auto sl = slack(c, phi.target_rate - rate(n, q));
        v += c * sl.s - std::log(sl.u) - std::log(sl.s);
      }
    }
    return v;
  }

  // h[block k] += w * coords(A E_i A) for every basis element E_i.
  void add_block_hessian(Eigen::MatrixXd& h, int k, const Mat& a, double w) const {
    const int off = k * per_;
    double col[kMaxDim * kMaxDim] = {};
    for (int i = 0; i < per_; ++i) {
      const Mat aea = a * basis_[static_cast<std::size_t>(i)] * a;
      hcoords::to_coords(aea, col);
      for (int j = 0; j < per_; ++j) h(off + j, off + i) += w * col[j];
    }
  }

  // Newton centering at fixed t. Returns the number of steps taken.
  int center(Eigen::VectorXd& x, double t, int budget) const {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d_);
    for (int k = 0; k < k_; ++k)
      for (int i = 0; i < m_; ++i) e(k * per_ + i) = 1.0;
    const double frames = static_cast<double>(frames_.size());

    Eigen::MatrixXd rank_rows(std::max(n_soft_, 1), d_);
    Eigen::VectorXd g(d_);
    Eigen::VectorXd gr(d_);
    Eigen::MatrixXd h(d_, d_);
    std::vector<Mat> grads(static_cast<std::size_t>(k_));
    int steps = 0;
    double v0 = barrier_value(x, t);
    for (; steps < budget; ++steps) {
      const auto q = blocks(x);
      double tr = 0.0;
      for (const auto& b : q) tr += b.trace().real();
      const double slack_tr = pmax_ - tr;
      g = (t * frames + 1.0 / slack_tr) * e;
      h = e * e.transpose() / (slack_tr * slack_tr);
      for (int k = 0; k < k_; ++k) {
        Eigen::LLT<Mat> llt(q[static_cast<std::size_t>(k)]);
        const Mat inv = llt.solve(Mat::Identity(m_, m_));
        hcoords::to_coords(inv, gr.data() + k * per_);
        add_block_hessian(h, k, inv, 1.0);
      }
      g -= gr;
      int row = 0;
      for (std::size_t n = 0; n < frames_.size(); ++n) {
        const RateShaper& phi = frames_[n];
        if (phi.kind == RateShaper::Kind::none || (phi.kind == RateShaper::Kind::soft_target && !soft(phi))) continue;
        double r = 0.0;
        for (int k = 0; k < k_; ++k) {
          const Mat& gk = gram(n, k);
          const Mat s = Mat::Identity(m_, m_) + gk * q[static_cast<std::size_t>(k)];
          r += std::log(s.determinant().real());
          const Mat a = s.partialPivLu().solve(gk);
          grads[static_cast<std::size_t>(k)] = (a + a.adjoint()) * 0.5;
        }
        double w_grad;  // weight of dR in the barrier gradient (negated)
        double w_rank = 0.0;
        if (phi.kind == RateShaper::Kind::linear) {
          w_grad = t * phi.slope;
        } else {
          const auto sl = slack(t * phi.tolerance, phi.target_rate - r);
          w_grad = 1.0 / sl.u;
          w_rank = 1.0 / (sl.s * sl.s + sl.u * sl.u);
        }
        for (int k = 0; k < k_; ++k) {
          hcoords::to_coords(grads[static_cast<std::size_t>(k)], gr.data() + k * per_);
          add_block_hessian(h, k, grads[static_cast<std::size_t>(k)], w_grad);
        }
        g -= w_grad * gr;
        if (w_rank > 0.0) rank_rows.row(row++) = std::sqrt(w_rank) * gr.transpose();
      }
      if (row > 0) h.noalias() += rank_rows.topRows(row).transpose() * rank_rows.topRows(row);

      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      const Eigen::VectorXd dx = ldlt.solve(-g);
      if (!dx.allFinite()) break;
      const double decrement = -g.dot(dx);
      if (!(decrement / 2.0 > 1e-9)) break;

      double step = 1.0;
      double v1 = barrier_value(x + step * dx, t);
      int halvings = 0;
      while (!(v1 <= v0 - 0.25 * step * decrement) && halvings < 60) {
        step *= 0.5;
        v1 = barrier_value(x + step * dx, t);
        ++halvings;
      }
      if (!std::isfinite(v1) || halvings >= 60) break;
      x += step * dx;
      // Rounding floor: the barrier value no longer resolves the step.
      const bool stalled = v0 - v1 <= 1e-15 * std::abs(v0);
      v0 = v1;
      if (stalled) break;
    }
    return steps;
  }

  int k_, m_, per_ = 0, d_ = 0;
  double pmax_;
  int n_soft_ = 0;
  double constraints_ = 0.0;
  std::vector<RateShaper> frames_;
  std::vector<Mat> gram_;
  std::vector<Mat> basis_;
};

inline double summed_loss(const LossHistory& history, int count, const BlockDiagHermitian& q) {
  double f = 0.0;
  for (int n = 0; n < count; ++n) {
    const auto& fr = history.frames[static_cast<std::size_t>(n)];
    f += loss(q, fr.channel, fr.shaper);
  }
  return f;
}

inline HindsightSolution projected_subgradient(const LossHistory& history, int count, const HindsightOptions& opt) {
  const auto& first = history.frames.front().played;
  const int k = first.num_blocks();
  const int m = first.block_dim();
  const double pmax = first.pmax();
  BlockDiagHermitian q = BlockDiagHermitian::identity(k, m, pmax / (2.0 * k * m));
  BlockDiagHermitian best = q;
  double best_value = summed_loss(history, count, q);
  double g_max = 0.0;
  double last_checkpoint = best_value;
  int it = 1;
  for (; it <= opt.max_iterations; ++it) {
    BlockDiagHermitian g = BlockDiagHermitian::zero(k, m);
    double value = 0.0;
    for (int n = 0; n < count; ++n) {
      const auto& fr = history.frames[static_cast<std::size_t>(n)];
      auto ev = evaluate_loss(q, fr.channel, fr.shaper);
      value += ev.loss;
      g += ev.gradient.blocks;
    }
    if (value < best_value) {
      best_value = value;
      best = q;
    }
    double g_norm = 0.0;
    for (const auto& b : g.blocks) g_norm += b.matrix().squaredNorm();
    g_norm = std::sqrt(g_norm);
    if (g_norm == 0.0) break;
    g_max = std::max(g_max, g_norm);
    const double step = pmax / (g_max * std::sqrt(static_cast<double>(it)));
    q = project_feasible(q - step * g, pmax).blocks();
    if (it % 200 == 0) {
      if (last_checkpoint - best_value <= opt.min_relative_improvement * std::max(1.0, std::abs(best_value))) break;
      last_checkpoint = best_value;
    }
  }
  HindsightSolution sol{PowerProfile(best, pmax), best_value, std::numeric_limits<double>::quiet_NaN(), it};
  return sol;
}

template <int M>
HindsightSolution solve_barrier(const LossHistory& history, int count, const HindsightOptions& opt) {
  const auto& first = history.frames.front().played;
  BarrierSolver<M> solver(history, count, first.num_blocks(), first.block_dim(), first.pmax());
  auto r = solver.solve(opt);
  // The interior point is already in X up to rounding; projecting makes it exact.
  PowerProfile q = project_feasible(r.q, first.pmax());
  const double value = summed_loss(history, count, q.blocks());
  return {std::move(q), value, r.gap_bound + std::max(0.0, value - r.objective), r.newton_steps};
}

}  // namespace detail

// Best fixed profile over the first `count` frames (all frames when omitted).
inline HindsightSolution best_fixed_profile(const LossHistory& history, const HindsightOptions& opt = {},
                                            std::optional<int> count = std::nullopt) {
  if (history.empty()) throw InvalidInput("best_fixed_profile: empty history");
  const int n = count.value_or(history.size());
  if (n < 1 || n > history.size()) throw InvalidInput("best_fixed_profile: prefix length out of range");
  if (opt.method == HindsightOptions::Method::projected_subgradient)
    return detail::projected_subgradient(history, n, opt);
  switch (history.frames.front().played.block_dim()) {
    case 1: return detail::solve_barrier<1>(history, n, opt);
    case 2: return detail::solve_barrier<2>(history, n, opt);
    case 3: return detail::solve_barrier<3>(history, n, opt);
    case 4: return detail::solve_barrier<4>(history, n, opt);
    default: return detail::solve_barrier<Eigen::Dynamic>(history, n, opt);
  }
}

struct RegretValue {
  double cumulative = 0.0;
  double average = 0.0;
};

inline RegretValue regret(const LossHistory& history, const HindsightSolution& solution) {
  if (history.empty()) throw InvalidInput("regret: empty history");
  double played = 0.0;
  for (const auto& f : history.frames) played += f.loss;
  const double fixed = detail::summed_loss(history, history.size(), solution.q_star.blocks());
  RegretValue r;
  r.cumulative = played - fixed;
  r.average = r.cumulative / history.size();
  return r;
}

// Regret of every prefix T = 1..N of the history.
struct RegretCurve {
  std::vector<double> cumulative;  // best fixed profile found among the candidates
  std::vector<double> certified;   // upper estimate from a convexity lower bound on min F_T
  std::vector<int> anchors;        // prefixes solved to optimality
  std::vector<PowerProfile> anchor_profiles;
};

struct RegretCurveOptions {
  HindsightOptions solver;
  int exact_prefix = 8;        // every T <= exact_prefix is an anchor
  double anchor_growth = 1.5;  // geometric spacing beyond that
};

inline std::vector<int> anchor_grid(int horizon, const RegretCurveOptions& opt) {
  std::vector<int> out;
  for (int t = 1; t <= std::min(horizon, opt.exact_prefix); ++t) out.push_back(t);
  double next = std::max(1, opt.exact_prefix) * opt.anchor_growth;
  while (static_cast<int>(next) < horizon) {
    const int t = static_cast<int>(next);
    if (out.empty() || t > out.back()) out.push_back(t);
    next *= opt.anchor_growth;
  }
  if (out.empty() || out.back() != horizon) out.push_back(horizon);
  return out;
}

namespace detail {

// Running F_T(c) and sum of subgradients for a fixed candidate c.
class CandidateTrack {
 public:
  explicit CandidateTrack(PowerProfile q) : q_(std::move(q)) {}

  void push(const HistoryFrame& f) {
    auto ev = evaluate_loss(q_, f.channel, f.shaper);
    value_ += ev.loss;
    if (grad_.blocks.empty()) grad_ = ev.gradient.blocks;
    else grad_ += ev.gradient.blocks;
  }

  double value() const { return value_; }

  // min over X of the linearization of F_T at c.
  double lower_bound() const {
    double low = std::numeric_limits<double>::infinity();
    for (const auto& b : grad_.blocks) low = std::min(low, lambda_min(b));
    return value_ - trace_product(q_.blocks(), grad_) + q_.pmax() * std::min(0.0, low);
  }

  const PowerProfile& profile() const { return q_; }

 private:
  PowerProfile q_;
  double value_ = 0.0;
  BlockDiagHermitian grad_;
};

}  // namespace detail

inline RegretCurve regret_curve(const LossHistory& history, const RegretCurveOptions& opt = {}) {
  if (history.empty()) throw InvalidInput("regret_curve: empty history");
  const int horizon = history.size();
  RegretCurve curve;
  curve.anchors = anchor_grid(horizon, opt);
  std::vector<detail::CandidateTrack> tracks;
  for (int t : curve.anchors) {
    auto sol = best_fixed_profile(history, opt.solver, t);
    curve.anchor_profiles.push_back(sol.q_star);
    tracks.emplace_back(sol.q_star);
  }
  const auto& first = history.frames.front().played;
  tracks.emplace_back(PowerProfile::zero(first.num_blocks(), first.block_dim(), first.pmax()));

  curve.cumulative.resize(static_cast<std::size_t>(horizon));
  curve.certified.resize(static_cast<std::size_t>(horizon));
  double played = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const auto& f = history.frames[static_cast<std::size_t>(t)];
    played += f.loss;
    double best = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    for (auto& tr : tracks) {
      tr.push(f);
      best = std::min(best, tr.value());
      lower = std::max(lower, tr.lower_bound());
    }
    curve.cumulative[static_cast<std::size_t>(t)] = played - best;
    curve.certified[static_cast<std::size_t>(t)] = played - std::min(lower, best);
  }
  return curve;
}

// RHS - LHS of  tr[A X] - log(1 + tr e^X) <= tr[A log A] + (1 - tr A) log(1 - tr A),
// for A >= 0 with tr A <= 1 (0 log 0 = 0).
inline double fenchel_gap(const HermitianMatrix& a, const HermitianMatrix& x) {
  if (a.dim() != x.dim()) throw ShapeError("fenchel_gap: dimension mismatch");
  const auto eig = herm_eig(a);
  const double low = eig.values(eig.values.size() - 1);
  const double tr = a.trace();
  if (low < -1e-12 || tr > 1.0 + 1e-12)
    throw InvalidInput("fenchel_gap: A must be PSD with trace at most one");
  auto xlogx = [](double v) { return v > 0.0 ? v * std::log(v) : 0.0; };
  double rhs = xlogx(1.0 - std::min(tr, 1.0));
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) rhs += xlogx(eig.values(i));
  const double lhs = trace_product(a, x) - log_one_plus_trace_exp(BlockDiagHermitian({x}));
  return rhs - lhs;
}

// -(tr[A log A] + (1 - a) log(1 - a)) with A = Q / pmax and a = tr A: the von
// Neumann entropy of diag(1 - a, A). At most log(1 + KM).
inline double augmented_entropy(const PowerProfile& q) {
  const double pmax = q.pmax();
  double a = 0.0;
  double s = 0.0;
  for (const auto& b : q.blocks().blocks) {
    const auto eig = herm_eig(b);
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
      const double v = std::max(eig.values(i), 0.0) / pmax;
      a += v;
      if (v > 0.0) s -= v * std::log(v);
    }
  }
  const double rest = std::max(1.0 - a, 0.0);
  if (rest > 0.0) s -= rest * std::log(rest);
  return s;
}

}  // namespace mxl
