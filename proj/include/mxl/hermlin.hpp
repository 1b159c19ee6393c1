#pragma once

// Dense complex Hermitian kernels: eigendecomposition-based matrix functions,
// norms, block-diagonal containers and the trace-normalized exponential map
// that turns a score matrix into a feasible power profile.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mxl/errors.hpp"

namespace mxl {

using cplx = std::complex<double>;

// Antenna counts are small; matrices live on the stack up to this size.
inline constexpr int kMaxDim = 8;

using CMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using RVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

namespace detail {

inline bool all_finite(const CMatrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (!std::isfinite(a(i, j).real()) || !std::isfinite(a(i, j).imag())) return false;
  return true;
}

inline void check_dim(Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (rows != cols) throw ShapeError(std::string(what) + ": matrix is not square");
  if (rows < 1 || rows > kMaxDim)
    throw ShapeError(std::string(what) + ": dimension " + std::to_string(rows) + " outside [1, " +
                     std::to_string(kMaxDim) + "]");
}

}  // namespace detail

// Square complex matrix equal to its conjugate transpose. Construction
// symmetrizes as (A + A^H)/2 and zeroes the imaginary part of the diagonal.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(const CMatrix& a) {
    detail::check_dim(a.rows(), a.cols(), "HermitianMatrix");
    m_ = (a + a.adjoint()) * 0.5;
    for (Eigen::Index i = 0; i < m_.rows(); ++i) m_(i, i) = cplx(m_(i, i).real(), 0.0);
  }

  static HermitianMatrix zero(int dim) { return HermitianMatrix(CMatrix::Zero(dim, dim)); }

  static HermitianMatrix identity(int dim, double scale = 1.0) {
    return HermitianMatrix(CMatrix::Identity(dim, dim) * scale);
  }

  static HermitianMatrix diagonal(std::span<const double> values) {
    CMatrix d = CMatrix::Zero(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) d(i, i) = values[i];
    return HermitianMatrix(d);
  }

  static HermitianMatrix diagonal(std::initializer_list<double> values) {
    return diagonal(std::span<const double>(values.begin(), values.size()));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }
  cplx operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return m_.trace().real(); }

  HermitianMatrix& operator+=(const HermitianMatrix& o) {
    same_dim(o);
    m_ += o.m_;
    return *this;
  }
  HermitianMatrix& operator-=(const HermitianMatrix& o) {
    same_dim(o);
    m_ -= o.m_;
    return *this;
  }
  HermitianMatrix& operator*=(double s) {
    m_ *= s;
    return *this;
  }

  friend HermitianMatrix operator+(HermitianMatrix a, const HermitianMatrix& b) { return a += b; }
  friend HermitianMatrix operator-(HermitianMatrix a, const HermitianMatrix& b) { return a -= b; }
  friend HermitianMatrix operator*(HermitianMatrix a, double s) { return a *= s; }
  friend HermitianMatrix operator*(double s, HermitianMatrix a) { return a *= s; }
  HermitianMatrix operator-() const { return *this * -1.0; }

  // tr(A B) for Hermitian A, B is real.
  friend double trace_product(const HermitianMatrix& a, const HermitianMatrix& b) {
    a.same_dim(b);
    return (a.m_.cwiseProduct(b.m_.transpose())).sum().real();
  }

 private:
  void same_dim(const HermitianMatrix& o) const {
    if (o.dim() != dim()) throw ShapeError("HermitianMatrix: dimension mismatch");
  }

  CMatrix m_;
};

struct EigenDecomposition {
  RVector values;   // descending
  CMatrix vectors;  // columns are the matching orthonormal eigenvectors
};

inline EigenDecomposition herm_eig(const HermitianMatrix& a) {
  if (!detail::all_finite(a.matrix())) throw InvalidInput("herm_eig: non-finite entries");
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(a.matrix());
  if (solver.info() != Eigen::Success) throw InvalidInput("herm_eig: eigensolver did not converge");
  const Eigen::Index n = a.dim();
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

// U diag(f(lambda)) U^H.
template <class F>
HermitianMatrix spectral_apply(const EigenDecomposition& eig, F&& f) {
  const Eigen::Index n = eig.values.size();
  RVector mapped(n);
  for (Eigen::Index i = 0; i < n; ++i) mapped(i) = f(eig.values(i));
  CMatrix scaled = eig.vectors * mapped.cast<cplx>().asDiagonal();
  return HermitianMatrix(CMatrix(scaled * eig.vectors.adjoint()));
}

template <class F>
HermitianMatrix spectral_apply(const HermitianMatrix& a, F&& f) {
  return spectral_apply(herm_eig(a), std::forward<F>(f));
}

inline HermitianMatrix herm_exp(const HermitianMatrix& a) {
  const auto eig = herm_eig(a);
  if (eig.values(0) > std::log(std::numeric_limits<double>::max()))
    throw NumericOverflow("herm_exp: largest eigenvalue " + std::to_string(eig.values(0)) + " overflows");
  return spectral_apply(eig, [](double x) { return std::exp(x); });
}

inline constexpr double kPdRelativeTolerance = 1e-12;

inline void require_positive_definite(const EigenDecomposition& eig, const char* what) {
  const double top = eig.values(0);
  const double bottom = eig.values(eig.values.size() - 1);
  if (!(top > 0.0) || !(bottom > kPdRelativeTolerance * top))
    throw NotPositiveDefinite(std::string(what) + ": eigenvalues in [" + std::to_string(bottom) + ", " +
                              std::to_string(top) + "]");
}

inline HermitianMatrix inv_sqrt(const HermitianMatrix& w) {
  const auto eig = herm_eig(w);
  require_positive_definite(eig, "inv_sqrt");
  return spectral_apply(eig, [](double x) { return 1.0 / std::sqrt(x); });
}

inline double log_det_pd(const HermitianMatrix& w) {
  const auto eig = herm_eig(w);
  require_positive_definite(eig, "log_det_pd");
  double s = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) s += std::log(eig.values(i));
  return s;
}

// Spectral radius max|lambda|.
inline double spectral_norm(const HermitianMatrix& a) {
  const auto eig = herm_eig(a);
  return std::max(std::abs(eig.values(0)), std::abs(eig.values(eig.values.size() - 1)));
}

// Sum of singular values, i.e. sum of |lambda| for Hermitian input.
inline double nuclear_norm(const HermitianMatrix& a) {
  const auto eig = herm_eig(a);
  return eig.values.cwiseAbs().sum();
}

inline double lambda_max(const HermitianMatrix& a) { return herm_eig(a).values(0); }

inline double lambda_min(const HermitianMatrix& a) {
  const auto eig = herm_eig(a);
  return eig.values(eig.values.size() - 1);
}

// diag(A_1, ..., A_K), one block per subcarrier. All operations act blockwise.
struct BlockDiagHermitian {
  std::vector<HermitianMatrix> blocks;

  BlockDiagHermitian() = default;
  explicit BlockDiagHermitian(std::vector<HermitianMatrix> b) : blocks(std::move(b)) {}

  static BlockDiagHermitian zero(int num_blocks, int dim) {
    return BlockDiagHermitian(std::vector<HermitianMatrix>(static_cast<std::size_t>(num_blocks),
                                                           HermitianMatrix::zero(dim)));
  }
  static BlockDiagHermitian identity(int num_blocks, int dim, double scale = 1.0) {
    return BlockDiagHermitian(std::vector<HermitianMatrix>(static_cast<std::size_t>(num_blocks),
                                                           HermitianMatrix::identity(dim, scale)));
  }

  int num_blocks() const { return static_cast<int>(blocks.size()); }
  // Dimension of the implied full matrix.
  int total_dim() const {
    int d = 0;
    for (const auto& b : blocks) d += b.dim();
    return d;
  }
  const HermitianMatrix& operator[](std::size_t k) const { return blocks[k]; }
  HermitianMatrix& operator[](std::size_t k) { return blocks[k]; }

  double trace() const {
    double t = 0.0;
    for (const auto& b : blocks) t += b.trace();
    return t;
  }

  BlockDiagHermitian& operator+=(const BlockDiagHermitian& o) {
    same_shape(o);
    for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k] += o.blocks[k];
    return *this;
  }
  BlockDiagHermitian& operator-=(const BlockDiagHermitian& o) {
    same_shape(o);
    for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k] -= o.blocks[k];
    return *this;
  }
  BlockDiagHermitian& operator*=(double s) {
    for (auto& b : blocks) b *= s;
    return *this;
  }
  friend BlockDiagHermitian operator+(BlockDiagHermitian a, const BlockDiagHermitian& b) { return a += b; }
  friend BlockDiagHermitian operator-(BlockDiagHermitian a, const BlockDiagHermitian& b) { return a -= b; }
  friend BlockDiagHermitian operator*(BlockDiagHermitian a, double s) { return a *= s; }
  friend BlockDiagHermitian operator*(double s, BlockDiagHermitian a) { return a *= s; }

  friend double trace_product(const BlockDiagHermitian& a, const BlockDiagHermitian& b) {
    a.same_shape(b);
    double s = 0.0;
    for (std::size_t k = 0; k < a.blocks.size(); ++k) s += trace_product(a.blocks[k], b.blocks[k]);
    return s;
  }

  void same_shape(const BlockDiagHermitian& o) const {
    if (o.blocks.size() != blocks.size()) throw ShapeError("BlockDiagHermitian: block count mismatch");
    for (std::size_t k = 0; k < blocks.size(); ++k)
      if (o.blocks[k].dim() != blocks[k].dim()) throw ShapeError("BlockDiagHermitian: block size mismatch");
  }
};

inline double spectral_norm(const BlockDiagHermitian& a) {
  double s = 0.0;
  for (const auto& b : a.blocks) s = std::max(s, spectral_norm(b));
  return s;
}

inline double nuclear_norm(const BlockDiagHermitian& a) {
  double s = 0.0;
  for (const auto& b : a.blocks) s += nuclear_norm(b);
  return s;
}

inline double lambda_max(const BlockDiagHermitian& a) {
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& b : a.blocks) s = std::max(s, lambda_max(b));
  return s;
}

// Block-diagonal PSD transmit covariance Q = diag(Q_1..Q_K) with tr Q <= pmax.
class PowerProfile {
 public:
  static constexpr double kPsdSlack = 1e-12;    // relative to pmax
  static constexpr double kTraceSlack = 1e-9;   // relative to pmax

  PowerProfile() = default;

  // Validates membership in the feasible set. Eigenvalues within the PSD slack
  // below zero are clipped to zero.
  PowerProfile(BlockDiagHermitian blocks, double pmax) : blocks_(std::move(blocks)), pmax_(pmax) {
    if (!(pmax > 0.0) || !std::isfinite(pmax)) throw InvalidInput("PowerProfile: pmax must be positive");
    if (blocks_.blocks.empty()) throw InvalidInput("PowerProfile: at least one block required");
    for (auto& b : blocks_.blocks) {
      const auto eig = herm_eig(b);
      const double low = eig.values(eig.values.size() - 1);
      if (low < -kPsdSlack * pmax)
        throw InvalidInput("PowerProfile: block has negative eigenvalue " + std::to_string(low));
      if (low < 0.0) b = spectral_apply(eig, [](double x) { return std::max(x, 0.0); });
    }
    const double tr = blocks_.trace();
    if (tr > pmax * (1.0 + kTraceSlack))
      throw InvalidInput("PowerProfile: trace " + std::to_string(tr) + " exceeds pmax " + std::to_string(pmax));
  }

  static PowerProfile zero(int num_blocks, int dim, double pmax) {
    return PowerProfile(BlockDiagHermitian::zero(num_blocks, dim), pmax);
  }

  const BlockDiagHermitian& blocks() const { return blocks_; }
  const HermitianMatrix& operator[](std::size_t k) const { return blocks_.blocks[k]; }
  int num_blocks() const { return blocks_.num_blocks(); }
  int block_dim() const { return blocks_.blocks.front().dim(); }
  double pmax() const { return pmax_; }
  double trace() const { return blocks_.trace(); }

 private:
  BlockDiagHermitian blocks_;
  double pmax_ = 0.0;
};

// log(1 + tr exp(U)) evaluated without overflow.
inline double log_one_plus_trace_exp(const BlockDiagHermitian& u) {
  std::vector<EigenDecomposition> eigs;
  eigs.reserve(u.blocks.size());
  double top = 0.0;
  for (const auto& b : u.blocks) {
    eigs.push_back(herm_eig(b));
    top = std::max(top, eigs.back().values(0));
  }
  double s = std::exp(-top);
  for (const auto& e : eigs)
    for (Eigen::Index i = 0; i < e.values.size(); ++i) s += std::exp(e.values(i) - top);
  return top + std::log(s);
}

// Q = pmax exp(U) / (1 + tr exp(U)) with one normalizer shared by all blocks.
// U is shifted by its largest eigenvalue before exponentiating; the constant 1
// in the normalizer is rescaled by the same factor.
inline PowerProfile logit_map(const BlockDiagHermitian& u, double pmax) {
  if (!(pmax > 0.0) || !std::isfinite(pmax)) throw InvalidInput("logit_map: pmax must be positive");
  if (u.blocks.empty()) throw InvalidInput("logit_map: empty score matrix");
  std::vector<EigenDecomposition> eigs;
  eigs.reserve(u.blocks.size());
  double shift = -std::numeric_limits<double>::infinity();
  for (const auto& b : u.blocks) {
    eigs.push_back(herm_eig(b));
    shift = std::max(shift, eigs.back().values(0));
  }
  // When every eigenvalue is negative the unshifted form is already safe.
  shift = std::max(shift, 0.0);
  const double one = std::exp(-shift);
  double normalizer = one;
  for (const auto& e : eigs)
    for (Eigen::Index i = 0; i < e.values.size(); ++i) normalizer += std::exp(e.values(i) - shift);
  if (!std::isfinite(normalizer) || !(normalizer > 0.0)) throw NumericOverflow("logit_map: normalizer not finite");
  const double scale = pmax / normalizer;
  BlockDiagHermitian q;
  q.blocks.reserve(eigs.size());
  for (const auto& e : eigs)
    q.blocks.push_back(spectral_apply(e, [&](double x) { return scale * std::exp(x - shift); }));
  return PowerProfile(std::move(q), pmax);
}

}  // namespace mxl
