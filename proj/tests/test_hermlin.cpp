#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "mxl/hermlin.hpp"
#include "mxl/selftest.hpp"

using namespace mxl;
namespace st = mxl::selftest;

namespace {

double max_abs(const CMatrix& a) { return a.cwiseAbs().maxCoeff(); }

CMatrix dense(const BlockDiagHermitian& b) {
  const int n = b.total_dim();
  CMatrix out = CMatrix::Zero(n, n);
  int off = 0;
  for (const auto& blk : b.blocks) {
    out.block(off, off, blk.dim(), blk.dim()) = blk.matrix();
    off += blk.dim();
  }
  return out;
}

}  // namespace

TEST(HermitianMatrix, SymmetrizesOnConstruction) {
  CMatrix a(2, 2);
  a << cplx(1, 0.3), cplx(2, 1), cplx(0, 0), cplx(3, 0);
  HermitianMatrix h(a);
  EXPECT_DOUBLE_EQ(h.matrix()(0, 1).real(), 1.0);
  EXPECT_DOUBLE_EQ(h.matrix()(0, 1).imag(), 0.5);
  EXPECT_DOUBLE_EQ(h.matrix()(1, 0).imag(), -0.5);
  EXPECT_DOUBLE_EQ(h.matrix()(0, 0).imag(), 0.0);
}

TEST(HermitianMatrix, RejectsNonSquare) { EXPECT_THROW(HermitianMatrix(CMatrix::Zero(2, 3)), ShapeError); }

TEST(HermitianMatrix, TraceProductMatchesDense) {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    auto a = st::random_hermitian(rng, 3);
    auto b = st::random_hermitian(rng, 3);
    const cplx dense_tr = (a.matrix() * b.matrix()).trace();
    EXPECT_NEAR(trace_product(a, b), dense_tr.real(), 1e-12);
    EXPECT_NEAR(dense_tr.imag(), 0.0, 1e-12);
  }
}

TEST(HermEig, DiagonalInput) {
  const auto e = herm_eig(HermitianMatrix::diagonal({1.0, 3.0}));
  EXPECT_DOUBLE_EQ(e.values(0), 3.0);
  EXPECT_DOUBLE_EQ(e.values(1), 1.0);
  EXPECT_NEAR(std::abs(e.vectors(1, 0)), 1.0, 1e-15);
}

TEST(HermEig, PauliX) {
  CMatrix x(2, 2);
  x << 0, 1, 1, 0;
  const auto e = herm_eig(HermitianMatrix(x));
  EXPECT_NEAR(e.values(0), 1.0, 1e-15);
  EXPECT_NEAR(e.values(1), -1.0, 1e-15);
}

TEST(HermEig, ReconstructionAndUnitarity) {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    auto a = st::random_hermitian(rng, 4, 3.0);
    const auto e = herm_eig(a);
    const CMatrix rec = e.vectors * e.values.cast<cplx>().asDiagonal() * e.vectors.adjoint();
    EXPECT_LE(max_abs(rec - a.matrix()), 1e-10);
    EXPECT_LE(max_abs(e.vectors.adjoint() * e.vectors - CMatrix::Identity(4, 4)), 1e-12);
    for (int j = 0; j + 1 < 4; ++j) EXPECT_GE(e.values(j), e.values(j + 1));
  }
}

TEST(HermEig, RejectsNonFinite) {
  CMatrix a = CMatrix::Identity(2, 2);
  a(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(herm_eig(HermitianMatrix(a)), InvalidInput);
}

TEST(HermExp, ZeroGivesIdentity) {
  EXPECT_LE(max_abs(herm_exp(HermitianMatrix::zero(2)).matrix() - CMatrix::Identity(2, 2)), 1e-15);
}

TEST(HermExp, DiagonalLogs) {
  const auto e = herm_exp(HermitianMatrix::diagonal({std::log(2.0), std::log(3.0)}));
  EXPECT_NEAR(e.matrix()(0, 0).real(), 2.0, 1e-14);
  EXPECT_NEAR(e.matrix()(1, 1).real(), 3.0, 1e-14);
  EXPECT_NEAR(std::abs(e.matrix()(0, 1)), 0.0, 1e-15);
}

TEST(HermExp, MatchesTaylorOracle) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    auto a = st::random_hermitian(rng, 3, 2.0);
    const CMatrix ref = st::series_exp(a.matrix());
    EXPECT_LE(max_abs(herm_exp(a).matrix() - ref) / max_abs(ref), 1e-10);
  }
}

TEST(HermExp, InverseOfNegationWhenRepresentable) {
  // The product has condition number e^{2||A||}; beyond ||A|| ~ 5 the identity
  // sits below double-precision resolution.
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    auto a = st::random_hermitian(rng, 3, 1.0);
    a *= st::uniform(rng, 0.0, 4.0) / std::max(spectral_norm(a), 1e-12);
    const CMatrix prod = herm_exp(-a).matrix() * herm_exp(a).matrix();
    EXPECT_LE(max_abs(prod - CMatrix::Identity(3, 3)), 1e-8);
  }
}

TEST(HermExp, SpectrumIsExponentiatedUpToFifty) {
  Rng rng(16);
  for (int i = 0; i < 100; ++i) {
    auto a = st::random_hermitian(rng, 3, 1.0);
    a *= st::uniform(rng, 0.0, 50.0) / std::max(spectral_norm(a), 1e-12);
    const auto ea = herm_eig(a);
    const auto ee = herm_eig(herm_exp(a));
    const double top = std::exp(ea.values(0));
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(ee.values(j), std::exp(ea.values(j)), 1e-12 * top);
    // positive definite whenever the smallest eigenvalue is resolvable
    if (std::exp(ea.values(2)) > 1e-10 * top) {
      EXPECT_GT(ee.values(2), 0.0);
    }
  }
}

TEST(HermExp, OverflowIsReported) {
  EXPECT_THROW(herm_exp(HermitianMatrix::diagonal({800.0, 0.0})), NumericOverflow);
}

TEST(InvSqrt, Identity) {
  EXPECT_LE(max_abs(inv_sqrt(HermitianMatrix::identity(3)).matrix() - CMatrix::Identity(3, 3)), 1e-15);
}

TEST(InvSqrt, Diagonal) {
  const auto s = inv_sqrt(HermitianMatrix::diagonal({4.0, 9.0}));
  EXPECT_NEAR(s.matrix()(0, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(s.matrix()(1, 1).real(), 1.0 / 3.0, 1e-15);
}

TEST(InvSqrt, DefinitionalCheck) {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    auto w = st::random_pd(rng, 3);
    const auto s = inv_sqrt(w);
    EXPECT_LE(max_abs(s.matrix() * w.matrix() * s.matrix() - CMatrix::Identity(3, 3)), 1e-9);
  }
}

TEST(InvSqrt, RejectsSingularAndIndefinite) {
  EXPECT_THROW(inv_sqrt(HermitianMatrix::diagonal({1.0, 0.0})), NotPositiveDefinite);
  EXPECT_THROW(inv_sqrt(HermitianMatrix::diagonal({1.0, -2.0})), NotPositiveDefinite);
  EXPECT_THROW(inv_sqrt(HermitianMatrix::diagonal({1.0, 1e-14})), NotPositiveDefinite);
}

TEST(SpectralNorm, Examples) {
  EXPECT_DOUBLE_EQ(spectral_norm(HermitianMatrix::diagonal({1.0, -3.0})), 3.0);
  for (int d = 1; d <= 5; ++d) EXPECT_NEAR(spectral_norm(HermitianMatrix::identity(d)), 1.0, 1e-15);
}

TEST(SpectralNorm, PowerIterationOracle) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    auto a = st::random_hermitian(rng, 4, 2.0);
    const double ref = st::power_iteration_norm(a.matrix());
    EXPECT_NEAR(spectral_norm(a), ref, 1e-8 * (1.0 + ref));
  }
}

TEST(SpectralNorm, HomogeneityAndTriangle) {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    auto a = st::random_hermitian(rng, 3);
    auto b = st::random_hermitian(rng, 3);
    auto c = st::random_hermitian(rng, 3);
    const double s = st::uniform(rng, -5.0, 5.0);
    EXPECT_NEAR(spectral_norm(a * s), std::abs(s) * spectral_norm(a), 1e-12 * (1 + std::abs(s)));
    EXPECT_LE(spectral_norm(a + b + c), spectral_norm(a) + spectral_norm(b) + spectral_norm(c) + 1e-12);
  }
}

TEST(SpectralNorm, BlockDiagonalIsLargestBlock) {
  BlockDiagHermitian b{{HermitianMatrix::diagonal({1.0, -2.0}), HermitianMatrix::diagonal({0.5, -4.0})}};
  EXPECT_DOUBLE_EQ(spectral_norm(b), 4.0);
  EXPECT_DOUBLE_EQ(nuclear_norm(b), 7.5);
}

TEST(LogitMap, ZeroScoreSingleBlock) {
  const auto q = logit_map(BlockDiagHermitian::zero(1, 2), 1.0);
  EXPECT_NEAR(q.trace(), 2.0 / 3.0, 1e-15);
  EXPECT_LE(max_abs(q[0].matrix() - CMatrix::Identity(2, 2) / 3.0), 1e-15);
}

TEST(LogitMap, ZeroScoreInitialPower) {
  for (int k : {1, 4, 8})
    for (int m : {1, 2, 3}) {
      const double pmax = 7.5;
      const double km = k * m;
      EXPECT_NEAR(logit_map(BlockDiagHermitian::zero(k, m), pmax).trace(), pmax * km / (1.0 + km), 1e-13);
    }
}

TEST(LogitMap, GradientOfLogPartition) {
  Rng rng(10);
  for (int i = 0; i < 20; ++i) {
    const auto u = st::random_blocks(rng, 1, 3, 1.5);
    const double pmax = 2.0;
    const auto q = logit_map(u, pmax);
    const double h = 1e-5;
    for (const auto& d : st::hermitian_directions(3)) {
      BlockDiagHermitian up = u, dn = u;
      up.blocks[0] += HermitianMatrix(d) * h;
      dn.blocks[0] -= HermitianMatrix(d) * h;
      const double fd = pmax * (log_one_plus_trace_exp(up) - log_one_plus_trace_exp(dn)) / (2 * h);
      const double an = trace_product(q[0], HermitianMatrix(d));
      EXPECT_NEAR(fd, an, 1e-6 * (1.0 + std::abs(an)));
    }
  }
}

TEST(LogitMap, StrictlyInteriorForModerateScores) {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const auto u = st::random_blocks(rng, 3, 2, st::uniform(rng, 0.1, 6.0));
    const auto q = logit_map(u, 3.0);
    EXPECT_LT(q.trace(), 3.0);
    for (const auto& b : q.blocks().blocks) EXPECT_GT(lambda_min(b), 0.0);
  }
}

TEST(LogitMap, ShiftInvariantUnderHugeScores) {
  // exp overflow would appear without the max-eigenvalue shift
  BlockDiagHermitian u{{HermitianMatrix::diagonal({900.0, 899.0})}};
  const auto q = logit_map(u, 1.0);
  EXPECT_TRUE(std::isfinite(q.trace()));
  EXPECT_NEAR(q.trace(), 1.0, 1e-12);
  EXPECT_NEAR(q[0].matrix()(0, 0).real() / q[0].matrix()(1, 1).real(), std::numbers::e, 1e-9);
}

TEST(LogitMap, NuclearDistanceWithinPmaxTimesSpectral) {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const auto u1 = st::random_blocks(rng, 2, 2, 3.0);
    const auto u2 = st::random_blocks(rng, 2, 2, 3.0);
    const double pmax = 4.0;
    BlockDiagHermitian dq = logit_map(u1, pmax).blocks();
    dq -= logit_map(u2, pmax).blocks();
    BlockDiagHermitian du = u1;
    du -= u2;
    EXPECT_LE(nuclear_norm(dq), pmax * spectral_norm(du) * (1.0 + 1e-12));
  }
}

TEST(LogitMap, HalfPmaxConstantIsNotSharp) {
  // U1 = diag(L + e, L - e), U2 = L I: the ratio approaches pmax as L grows.
  EXPECT_GT(st::logit_lipschitz_ratio_near_boundary(30.0, 1e-4), 0.99);
}

TEST(BlockDiag, DenseTraceAndShapes) {
  Rng rng(14);
  auto a = st::random_blocks(rng, 3, 2);
  auto b = st::random_blocks(rng, 3, 2);
  EXPECT_NEAR(trace_product(a, b), (dense(a) * dense(b)).trace().real(), 1e-12);
  EXPECT_NEAR(a.trace(), dense(a).trace().real(), 1e-12);
  EXPECT_THROW(a += st::random_blocks(rng, 2, 2), ShapeError);
}

TEST(PowerProfile, ValidatesFeasibility) {
  EXPECT_THROW(PowerProfile(BlockDiagHermitian{{HermitianMatrix::diagonal({1.0, -0.5})}}, 2.0), InvalidInput);
  EXPECT_THROW(PowerProfile(BlockDiagHermitian{{HermitianMatrix::diagonal({1.5, 1.0})}}, 2.0), InvalidInput);
  EXPECT_THROW(PowerProfile(BlockDiagHermitian{{HermitianMatrix::identity(2)}}, 0.0), InvalidInput);
  EXPECT_NO_THROW(PowerProfile(BlockDiagHermitian{{HermitianMatrix::diagonal({1.0, 1.0})}}, 2.0));
}
