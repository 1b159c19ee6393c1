#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mxl/channel.hpp"
#include "mxl/selftest.hpp"

using namespace mxl;
namespace st = mxl::selftest;

namespace {

LinkSpec unit_spec(int k, int n, int m) {
  LinkSpec s;
  s.path_loss_db = 0.0;
  s.shadowing_db = 0.0;
  s.subcarriers = k;
  s.rx_antennas = n;
  s.tx_antennas = m;
  return s;
}

double logdet(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(a);
  return es.eigenvalues().array().log().sum();
}

}  // namespace

TEST(PathLoss, OneKilometreHandValue) {
  // 46.3 + 33.9 log f - 13.82 log hb - a(hm) + 3 with log d = 0
  EXPECT_NEAR(path_loss_db(1.0, 2500.0, 32.0, 1.5), 143.63317899282046, 1e-9);
}

TEST(PathLoss, DoublingDistanceSlope) {
  const double slope = (44.9 - 6.55 * std::log10(32.0)) * std::log10(2.0);
  EXPECT_NEAR(path_loss_db(2.0, 2500.0, 32.0, 1.5) - path_loss_db(1.0, 2500.0, 32.0, 1.5), slope, 1e-12);
  EXPECT_NEAR(slope, 10.548472646333053, 1e-12);
}

TEST(PathLoss, ClampsShortDistances) {
  EXPECT_DOUBLE_EQ(path_loss_db(0.01, 2500.0, 32.0, 1.5), path_loss_db(0.02, 2500.0, 32.0, 1.5));
  EXPECT_THROW(path_loss_db(0.0, 2500.0, 32.0, 1.5), InvalidInput);
  EXPECT_THROW(path_loss_db(-1.0, 2500.0, 32.0, 1.5), InvalidInput);
}

TEST(PathLoss, ValidityRangeFlag) {
  EXPECT_TRUE(cost231_in_validity_range(2000.0));
  EXPECT_TRUE(cost231_in_validity_range(2500.0));
  EXPECT_FALSE(cost231_in_validity_range(3500.0));
}

TEST(NoisePower, TableValues) { EXPECT_NEAR(noise_power_w(-174.0, 7.0, 10937.5), 2.1823181569972156e-16, 1e-28); }

TEST(DrawLink, UnitVarianceWithoutLossOrShadowing) {
  Rng rng(1);
  const auto link = draw_link(rng, unit_spec(64, 4, 4), 0, 1);
  EXPECT_DOUBLE_EQ(link.entry_variance, 1.0);
  // 1024 complex entries; mean |h|^2 within 5 standard errors of 1
  const double mean = link.gain() / (64.0 * 16.0);
  EXPECT_NEAR(mean, 1.0, 5.0 / std::sqrt(1024.0));
}

TEST(DrawLink, VarianceFollowsPathLoss) {
  Rng rng(2);
  LinkSpec s = unit_spec(1, 1, 1);
  s.path_loss_db = 30.0;
  EXPECT_NEAR(draw_link(rng, s, 0, 0).entry_variance, 1e-3, 1e-18);
}

TEST(DrawLink, ShadowingIsLogNormal) {
  Rng rng(3);
  LinkSpec s = unit_spec(1, 1, 1);
  s.shadowing_db = 8.9;
  double sum = 0.0, sq = 0.0;
  constexpr int kDraws = 20000;
  for (int i = 0; i < kDraws; ++i) {
    const double db = -10.0 * std::log10(draw_link(rng, s, 0, 0).entry_variance);
    sum += db;
    sq += db * db;
  }
  const double mean = sum / kDraws;
  const double sd = std::sqrt(sq / kDraws - mean * mean);
  EXPECT_NEAR(mean, 0.0, 4.0 * 8.9 / std::sqrt(kDraws));
  EXPECT_NEAR(sd, 8.9, 0.15);
}

TEST(DrawLink, RejectsBadDimensions) {
  Rng rng(4);
  EXPECT_THROW(draw_link(rng, unit_spec(0, 2, 2), 0, 0), InvalidInput);
  EXPECT_THROW(draw_link(rng, unit_spec(1, kMaxDim + 1, 2), 0, 0), InvalidInput);
}

TEST(Streams, IndependentAndReproducible) {
  EXPECT_EQ(make_stream(5, 1)(), make_stream(5, 1)());
  EXPECT_NE(make_stream(5, 1)(), make_stream(5, 2)());
  EXPECT_NE(make_stream(5, 1)(), make_stream(6, 1)());
}

TEST(Mui, NoInterferersGivesNoiseFloor) {
  const auto w = mui_covariance(0, {}, {}, 2, 3, 2.5e-16);
  ASSERT_EQ(w.per_subcarrier.size(), 3u);
  for (const auto& wk : w.per_subcarrier) {
    EXPECT_LE((wk.matrix() - CMatrix::Identity(2, 2) * 2.5e-16).cwiseAbs().maxCoeff(), 1e-30);
  }
}

TEST(Mui, RankOneInterfererRankBound) {
  Rng rng(5);
  auto link = draw_link(rng, unit_spec(2, 3, 3), 1, 0);
  CMatrix v = st::random_complex(rng, 3, 1);
  BlockDiagHermitian qb{{HermitianMatrix(v * v.adjoint() * 0.1), HermitianMatrix(v * v.adjoint() * 0.2)}};
  const PowerProfile q(qb, 10.0);
  const LinkMatrixSet* links[] = {&link};
  const PowerProfile* profiles[] = {&q};
  const auto w = mui_covariance(0, links, profiles, 3, 2, 1.0);
  for (const auto& wk : w.per_subcarrier) {
    const auto e = herm_eig(wk - HermitianMatrix::identity(3));
    EXPECT_GT(e.values(0), 1e-6);
    EXPECT_LE(std::abs(e.values(1)), 1e-12);
    EXPECT_LE(std::abs(e.values(2)), 1e-12);
  }
}

TEST(Mui, DominatesNoiseFloor) {
  Rng rng(6);
  auto l1 = draw_link(rng, unit_spec(4, 2, 2), 1, 0);
  auto l2 = draw_link(rng, unit_spec(4, 2, 2), 2, 0);
  const auto q1 = st::random_profile(rng, 4, 2, 3.0);
  const auto q2 = st::random_profile(rng, 4, 2, 3.0);
  const LinkMatrixSet* links[] = {&l1, &l2};
  const PowerProfile* profiles[] = {&q1, &q2};
  const auto w = mui_covariance(0, links, profiles, 2, 4, 0.5);
  for (const auto& wk : w.per_subcarrier) EXPECT_GE(lambda_min(wk), 0.5 - 1e-12);
}

TEST(Mui, Errors) {
  Rng rng(7);
  auto link = draw_link(rng, unit_spec(2, 2, 2), 1, 0);
  auto own = draw_link(rng, unit_spec(2, 2, 2), 0, 0);
  const auto q = PowerProfile::zero(2, 2, 1.0);
  const auto q3 = PowerProfile::zero(3, 2, 1.0);
  const LinkMatrixSet* links[] = {&link};
  const LinkMatrixSet* own_links[] = {&own};
  const PowerProfile* good[] = {&q};
  const PowerProfile* wrong[] = {&q3};
  EXPECT_THROW(mui_covariance(0, links, wrong, 2, 2, 1.0), ShapeError);
  EXPECT_THROW(mui_covariance(0, links, good, 3, 2, 1.0), ShapeError);
  EXPECT_THROW(mui_covariance(0, own_links, good, 2, 2, 1.0), InvalidInput);
  EXPECT_THROW(mui_covariance(0, links, good, 2, 2, 0.0), InvalidInput);
}

TEST(EffectiveChannel, IdentityAndScaledCovariance) {
  Rng rng(8);
  const auto link = draw_link(rng, unit_spec(2, 2, 3), 0, 0);
  MuiCovariance w1{{HermitianMatrix::identity(2), HermitianMatrix::identity(2)}};
  MuiCovariance w4{{HermitianMatrix::identity(2, 4.0), HermitianMatrix::identity(2, 4.0)}};
  const auto h1 = effective_channel(link, w1);
  const auto h4 = effective_channel(link, w4);
  for (int k = 0; k < 2; ++k) {
    EXPECT_LE((h1.blocks[k] - link.per_subcarrier[k]).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((h4.blocks[k] - link.per_subcarrier[k] / 2.0).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(EffectiveChannel, WhitenedRateMatchesCovarianceForm) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = st::uniform_int(rng, 1, 4), n = st::uniform_int(rng, 1, 3), m = st::uniform_int(rng, 1, 3);
    const auto link = draw_link(rng, unit_spec(k, n, m), 0, 0);
    MuiCovariance w;
    for (int i = 0; i < k; ++i) w.per_subcarrier.push_back(st::random_pd(rng, n, 0.2));
    const auto q = st::random_profile(rng, k, m, 5.0);
    double direct = 0.0;
    for (int i = 0; i < k; ++i) {
      const CMatrix& h = link.per_subcarrier[i];
      const CMatrix& wk = w.per_subcarrier[i].matrix();
      direct += logdet(wk + h * q[i].matrix() * h.adjoint()) - logdet(wk);
    }
    EXPECT_NEAR(achievable_rate(effective_channel(link, w), q), direct, 1e-9 * (1.0 + std::abs(direct)));
  }
}

TEST(EffectiveChannel, ShapeMismatch) {
  Rng rng(10);
  const auto link = draw_link(rng, unit_spec(2, 2, 2), 0, 0);
  MuiCovariance w{{HermitianMatrix::identity(2)}};
  EXPECT_THROW(effective_channel(link, w), ShapeError);
  MuiCovariance w3{{HermitianMatrix::identity(3), HermitianMatrix::identity(3)}};
  EXPECT_THROW(effective_channel(link, w3), ShapeError);
}

TEST(Jakes, StaticUserIsFrozen) {
  EXPECT_DOUBLE_EQ(jakes_correlation(0.0, 2.5e9, 0.005), 1.0);
  Rng rng(11);
  auto link = draw_link(rng, unit_spec(2, 2, 2), 0, 0);
  const auto before = link.per_subcarrier;
  evolve_link(link, 1.0, rng);
  for (int k = 0; k < 2; ++k) EXPECT_EQ(before[k], link.per_subcarrier[k]);
}

TEST(Jakes, PedestrianCorrelation) {
  EXPECT_NEAR(doppler_hz(2.0, 2.5e9), 4.63283465552989, 1e-12);
  EXPECT_NEAR(jakes_correlation(2.0, 2.5e9, 0.005), 0.9947111856012929, 1e-12);
}

TEST(Jakes, BesselAgreesWithPowerSeries) {
  const auto c = st::jakes_series();
  EXPECT_TRUE(c.passed) << c.name << " worst " << c.worst;
}

TEST(Jakes, ClampedToUnitInterval) {
  for (double v = 0.0; v <= 2000.0; v += 7.0) {
    const double r = jakes_correlation(v, 2.5e9, 0.005);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
  EXPECT_THROW(jakes_correlation(-1.0, 2.5e9, 0.005), InvalidInput);
}

TEST(Fading, StationaryMarginalVariance) {
  Rng rng(12);
  LinkSpec s = unit_spec(8, 2, 2);
  s.path_loss_db = 20.0;
  std::vector<LinkMatrixSet> links{draw_link(rng, s, 0, 0)};
  const double var = links[0].entry_variance;
  FadingState state(std::move(links), {jakes_correlation(130.0, 2.5e9, 0.005)}, Rng(13));
  double sum = 0.0;
  int count = 0;
  for (int t = 0; t < 3000; ++t) {
    state.evolve();
    if (t % 10 == 0) {
      sum += state.link(0).gain();
      count += 8 * 4;
    }
  }
  // 300 snapshots of 32 entries, correlated at lag 10 only weakly
  EXPECT_NEAR(sum / count / var, 1.0, 0.05);
}

TEST(Fading, LagOneCorrelationMatchesRho) {
  Rng rng(14);
  std::vector<LinkMatrixSet> links{draw_link(rng, unit_spec(16, 2, 2), 0, 0)};
  const double rho = 0.8;
  FadingState state(std::move(links), {rho}, Rng(15));
  double cross = 0.0, power = 0.0;
  for (int t = 0; t < 2000; ++t) {
    const auto prev = state.link(0).per_subcarrier;
    state.evolve();
    for (std::size_t k = 0; k < prev.size(); ++k) {
      cross += (prev[k].conjugate().cwiseProduct(state.link(0).per_subcarrier[k])).sum().real();
      power += prev[k].squaredNorm();
    }
  }
  EXPECT_NEAR(cross / power, rho, 0.01);
}

TEST(Fading, RejectsBadCoefficients) {
  Rng rng(16);
  std::vector<LinkMatrixSet> links{draw_link(rng, unit_spec(1, 1, 1), 0, 0)};
  EXPECT_THROW(FadingState(links, {1.5}, Rng(1)), InvalidInput);
  EXPECT_THROW(FadingState(links, {}, Rng(1)), ShapeError);
}
