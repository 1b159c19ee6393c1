#pragma once

// Multi-user MIMO-OFDMA environment: COST-231 Hata path loss, per-link
// Rayleigh matrices with log-normal shadowing, Gauss-Markov (Jakes) fading,
// interference-plus-noise covariances and the whitened effective channel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mxl/errors.hpp"
#include "mxl/hermlin.hpp"
#include "mxl/objective.hpp"

namespace mxl {

using Rng = std::mt19937_64;

// splitmix64 finalizer; derives independent stream seeds from (seed, stream).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) { return Rng(mix_seed(seed, stream)); }

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kMinDistanceKm = 0.02;

inline bool cost231_in_validity_range(double freq_mhz) { return freq_mhz >= 150.0 && freq_mhz <= 2600.0; }

// COST-231 Hata, metropolitan correction (+3 dB). Distances below 20 m are clamped.
inline double path_loss_db(double distance_km, double freq_mhz, double h_bs_m, double h_ms_m) {
  if (!(distance_km > 0.0) || !std::isfinite(distance_km))
    throw InvalidInput("path_loss_db: distance must be positive, got " + std::to_string(distance_km));
  if (!(freq_mhz > 0.0) || !(h_bs_m > 0.0) || !(h_ms_m > 0.0))
    throw InvalidInput("path_loss_db: frequency and antenna heights must be positive");
  const double d = std::max(distance_km, kMinDistanceKm);
  const double lf = std::log10(freq_mhz);
  const double lh = std::log10(h_bs_m);
  const double a_ms = (1.1 * lf - 0.7) * h_ms_m - (1.56 * lf - 0.8);
  return 46.3 + 33.9 * lf - 13.82 * lh - a_ms + (44.9 - 6.55 * lh) * std::log10(d) + 3.0;
}

// Per-subcarrier ambient noise power in watts.
inline double noise_power_w(double noise_psd_dbm_hz, double noise_figure_db, double subcarrier_bw_hz) {
  return std::pow(10.0, (noise_psd_dbm_hz + noise_figure_db) / 10.0) / 1000.0 * subcarrier_bw_hz;
}

// H_{vu,k} for k = 1..K: the transfer matrices from tx_user to rx_user.
struct LinkMatrixSet {
  int tx_user = 0;
  int rx_user = 0;
  std::vector<CMatrix> per_subcarrier;  // N_rx x M_tx each
  double entry_variance = 0.0;          // large-scale gain incl. shadowing

  // sum_k tr(H_k H_k^H)
  double gain() const {
    double g = 0.0;
    for (const auto& h : per_subcarrier) g += h.squaredNorm();
    return g;
  }
};

struct LinkSpec {
  double path_loss_db = 0.0;
  double shadowing_db = 0.0;  // standard deviation
  int subcarriers = 1;
  int rx_antennas = 1;
  int tx_antennas = 1;
};

inline CMatrix complex_gaussian(Rng& rng, int rows, int cols, double variance) {
  std::normal_distribution<double> g(0.0, std::sqrt(variance / 2.0));
  CMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      const double re = g(rng);
      const double im = g(rng);
      m(i, j) = cplx(re, im);
    }
  return m;
}

// One shadowing draw per link; i.i.d. CN(0, 10^{-(PL+X)/10}) entries per subcarrier.
inline LinkMatrixSet draw_link(Rng& rng, const LinkSpec& spec, int tx_user, int rx_user) {
  if (spec.subcarriers < 1 || spec.rx_antennas < 1 || spec.tx_antennas < 1 || spec.rx_antennas > kMaxDim ||
      spec.tx_antennas > kMaxDim)
    throw InvalidInput("draw_link: invalid dimensions");
  double shadow = 0.0;
  if (spec.shadowing_db > 0.0) shadow = std::normal_distribution<double>(0.0, spec.shadowing_db)(rng);
  LinkMatrixSet link;
  link.tx_user = tx_user;
  link.rx_user = rx_user;
  link.entry_variance = std::pow(10.0, -(spec.path_loss_db + shadow) / 10.0);
  link.per_subcarrier.reserve(static_cast<std::size_t>(spec.subcarriers));
  for (int k = 0; k < spec.subcarriers; ++k)
    link.per_subcarrier.push_back(complex_gaussian(rng, spec.rx_antennas, spec.tx_antennas, link.entry_variance));
  return link;
}

// Interference-plus-noise covariance at one receiver, per subcarrier.
struct MuiCovariance {
  std::vector<HermitianMatrix> per_subcarrier;
};

// W_k = sigma^2 I + sum_v H_{vu,k} Q_{v,k} H_{vu,k}^H over the interfering links.
// interferers[i] must be paired with profiles[i].
inline MuiCovariance mui_covariance(int focal_user, std::span<const LinkMatrixSet* const> interferers,
                                    std::span<const PowerProfile* const> profiles, int rx_antennas, int subcarriers,
                                    double noise_power) {
  if (interferers.size() != profiles.size()) throw ShapeError("mui_covariance: links and profiles differ in count");
  if (!(noise_power > 0.0)) throw InvalidInput("mui_covariance: noise power must be positive");
  MuiCovariance w;
  w.per_subcarrier.reserve(static_cast<std::size_t>(subcarriers));
  for (int k = 0; k < subcarriers; ++k) {
    CMatrix acc = CMatrix::Identity(rx_antennas, rx_antennas) * noise_power;
    for (std::size_t i = 0; i < interferers.size(); ++i) {
      const LinkMatrixSet& link = *interferers[i];
      const PowerProfile& q = *profiles[i];
      if (link.rx_user != focal_user || link.tx_user == focal_user)
        throw InvalidInput("mui_covariance: link " + std::to_string(link.tx_user) + "->" +
                           std::to_string(link.rx_user) + " is not an interferer of user " +
                           std::to_string(focal_user));
      if (static_cast<int>(link.per_subcarrier.size()) != subcarriers || q.num_blocks() != subcarriers)
        throw ShapeError("mui_covariance: subcarrier count mismatch");
      const CMatrix& h = link.per_subcarrier[static_cast<std::size_t>(k)];
      if (h.rows() != rx_antennas || h.cols() != q[static_cast<std::size_t>(k)].dim())
        throw ShapeError("mui_covariance: link " + std::to_string(link.tx_user) + "->" +
                         std::to_string(link.rx_user) + " has incompatible dimensions");
      acc += h * q[static_cast<std::size_t>(k)].matrix() * h.adjoint();
    }
    w.per_subcarrier.emplace_back(acc);
  }
  return w;
}

inline EffectiveChannel effective_channel(const LinkMatrixSet& direct, const MuiCovariance& w) {
  if (direct.per_subcarrier.size() != w.per_subcarrier.size())
    throw ShapeError("effective_channel: subcarrier count mismatch");
  EffectiveChannel out;
  out.blocks.reserve(direct.per_subcarrier.size());
  for (std::size_t k = 0; k < direct.per_subcarrier.size(); ++k) {
    const CMatrix& h = direct.per_subcarrier[k];
    if (h.rows() != w.per_subcarrier[k].dim()) throw ShapeError("effective_channel: receiver dimension mismatch");
    out.blocks.push_back(inv_sqrt(w.per_subcarrier[k]).matrix() * h);
  }
  return out;
}

inline double doppler_hz(double speed_kmh, double freq_hz) { return speed_kmh / 3.6 * freq_hz / kSpeedOfLight; }

// Frame-to-frame correlation J0(2 pi f_d T_f), clamped to [0, 1].
inline double jakes_correlation(double speed_kmh, double freq_hz, double frame_duration_s) {
  if (!(speed_kmh >= 0.0)) throw InvalidInput("jakes_correlation: speed must be nonnegative");
  if (speed_kmh == 0.0) return 1.0;
  const double x = 2.0 * std::numbers::pi * doppler_hz(speed_kmh, freq_hz) * frame_duration_s;
  return std::clamp(std::cyl_bessel_j(0.0, x), 0.0, 1.0);
}

// h <- rho h + sqrt(1 - rho^2) w, w ~ CN(0, marginal variance). Keeps the
// per-entry variance stationary.
inline void evolve_link(LinkMatrixSet& link, double rho, Rng& rng) {
  if (rho >= 1.0) return;
  const double innovation = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (auto& h : link.per_subcarrier)
    h = rho * h + innovation * complex_gaussian(rng, static_cast<int>(h.rows()), static_cast<int>(h.cols()),
                                                link.entry_variance);
}

// Every link of the network plus the AR(1) coefficient each one evolves with.
// Owned by the simulation loop.
class FadingState {
 public:
  FadingState() = default;
  FadingState(std::vector<LinkMatrixSet> links, std::vector<double> rho, Rng rng)
      : links_(std::move(links)), rho_(std::move(rho)), rng_(std::move(rng)) {
    if (links_.size() != rho_.size()) throw ShapeError("FadingState: one coefficient per link required");
    for (double r : rho_)
      if (!(r >= 0.0 && r <= 1.0)) throw InvalidInput("FadingState: coefficient outside [0, 1]");
  }

  void evolve() {
    for (std::size_t i = 0; i < links_.size(); ++i) evolve_link(links_[i], rho_[i], rng_);
  }

  const std::vector<LinkMatrixSet>& links() const { return links_; }
  const LinkMatrixSet& link(std::size_t i) const { return links_[i]; }
  double rho(std::size_t i) const { return rho_[i]; }

 private:
  std::vector<LinkMatrixSet> links_;
  std::vector<double> rho_;
  Rng rng_;
};

}  // namespace mxl
