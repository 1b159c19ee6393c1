#pragma once

// TDD frame loop: every user plays its current profile, the network computes
// each receiver's interference from the same snapshot of all profiles, each
// transmitter observes its own gradient and updates its learner. A post-hoc
// audit computes hindsight regret and the theoretical bounds per user.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mxl/channel.hpp"
#include "mxl/errors.hpp"
#include "mxl/hermlin.hpp"
#include "mxl/hindsight.hpp"
#include "mxl/learner.hpp"
#include "mxl/objective.hpp"
#include "mxl/scenario.hpp"

namespace mxl {

// RNG stream ids derived from the master seed.
namespace streams {
inline constexpr std::uint64_t kLinks = 1;
inline constexpr std::uint64_t kFading = 2;
inline constexpr std::uint64_t kNoise = 100;
inline constexpr std::uint64_t kAsync = 200;
inline constexpr std::uint64_t kPilotNoise = 300;
inline constexpr std::uint64_t kMoment = 400;
}  // namespace streams

// All links of the scenario plus their fading. Transmitters move, base
// stations are fixed.
class Network {
 public:
  Network(const ScenarioConfig& c, std::uint64_t seed) : users_(c.num_users()), k_(c.subcarriers), n_rx_(c.rx_antennas) {
    validate(c);
    noise_ = noise_power_w(c.noise_psd_dbm_hz, c.noise_figure_db, c.subcarrier_bw_hz);
    const auto centers = hex_cell_centers(c.num_cells, c.cell_radius_m);
    Rng link_rng = make_stream(seed, streams::kLinks);
    std::vector<LinkMatrixSet> links;
    std::vector<double> rho;
    for (int v = 0; v < users_; ++v) {
      const auto& tx = c.users[static_cast<std::size_t>(v)];
      for (int u = 0; u < users_; ++u) {
        const auto& bs = centers[static_cast<std::size_t>(c.users[static_cast<std::size_t>(u)].cell_id)];
        const double d_km = std::hypot(tx.x_m - bs.first, tx.y_m - bs.second) / 1000.0;
        LinkSpec spec;
        spec.path_loss_db = path_loss_db(std::max(d_km, kMinDistanceKm), c.freq_hz / 1e6, c.bs_height_m, c.ms_height_m);
        spec.shadowing_db = c.shadowing_db;
        spec.subcarriers = c.subcarriers;
        spec.rx_antennas = c.rx_antennas;
        spec.tx_antennas = c.tx_antennas;
        links.push_back(draw_link(link_rng, spec, v, u));
        rho.push_back(jakes_correlation(tx.speed_kmh, c.freq_hz, c.frame_duration_s));
      }
    }
    fading_ = FadingState(std::move(links), std::move(rho), make_stream(seed, streams::kFading));
  }

  int num_users() const { return users_; }
  double noise_power() const { return noise_; }
  const LinkMatrixSet& link(int tx, int rx) const { return fading_.link(static_cast<std::size_t>(tx * users_ + rx)); }

  void evolve() { fading_.evolve(); }

  EffectiveChannel effective(int u, const std::vector<PowerProfile>& profiles) const {
    std::vector<const LinkMatrixSet*> links;
    std::vector<const PowerProfile*> qs;
    for (int v = 0; v < users_; ++v) {
      if (v == u) continue;
      links.push_back(&link(v, u));
      qs.push_back(&profiles[static_cast<std::size_t>(v)]);
    }
    const auto w = mui_covariance(u, links, qs, n_rx_, k_, noise_);
    return effective_channel(link(u, u), w);
  }

 private:
  int users_, k_, n_rx_;
  double noise_ = 0.0;
  FadingState fading_;
};

struct FrameRecord {
  double rate = 0.0;  // nats
  double loss = 0.0;
  double power_w = 0.0;
  double chan_gain = 0.0;
  double grad_norm = 0.0;        // ||V|| of the exact gradient
  double noisy_second_moment = 0.0;  // estimate of E||V + Xi||^2 (0 when noiseless)
};

struct PlayOptions {
  int frames = 1;
  bool keep_history = false;
  int moment_draws = 0;  // Monte-Carlo draws for E||V + Xi||^2, 0 disables
};

struct PlayResult {
  std::vector<std::vector<FrameRecord>> records;  // [user][frame]
  std::vector<LossHistory> histories;             // [user], when kept
};

namespace detail {

inline double noisy_second_moment(const GradientMatrix& v, const NoiseModel& noise, Rng& rng, int draws) {
  double s = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double n = spectral_norm(perturb_gradient(v, noise, rng).blocks);
    s += n * n;
  }
  return s / draws;
}

}  // namespace detail

// Runs the frame loop with fixed per-user step sizes and noise.
inline PlayResult play(const ScenarioConfig& c, const std::vector<double>& eta, const std::vector<NoiseModel>& noise,
                       const PlayOptions& opt) {
  const int users = c.num_users();
  if (static_cast<int>(eta.size()) != users || static_cast<int>(noise.size()) != users)
    throw InvalidInput("play: one step size and one noise model per user required");
  Network net(c, c.master_seed);
  std::vector<LearnerState> learners;
  std::vector<RateShaper> shapers;
  std::vector<Rng> noise_rng, async_rng, moment_rng;
  std::vector<std::deque<GradientMatrix>> pending(static_cast<std::size_t>(users));
  for (int u = 0; u < users; ++u) {
    const auto& uc = c.users[static_cast<std::size_t>(u)];
    learners.emplace_back(c.subcarriers, c.tx_antennas, eta[static_cast<std::size_t>(u)], user_pmax_w(uc));
    shapers.push_back(user_shaper(c, uc));
    noise_rng.push_back(make_stream(c.master_seed, streams::kNoise + static_cast<std::uint64_t>(u)));
    async_rng.push_back(make_stream(c.master_seed, streams::kAsync + static_cast<std::uint64_t>(u)));
    moment_rng.push_back(make_stream(c.master_seed, streams::kMoment + static_cast<std::uint64_t>(u)));
  }
  PlayResult out;
  out.records.assign(static_cast<std::size_t>(users), {});
  if (opt.keep_history) out.histories.assign(static_cast<std::size_t>(users), {});
  for (auto& r : out.records) r.reserve(static_cast<std::size_t>(opt.frames));

  std::vector<PowerProfile> profiles(static_cast<std::size_t>(users));
  std::vector<GradientMatrix> observed(static_cast<std::size_t>(users));
  for (int n = 1; n <= opt.frames; ++n) {
    if (n > 1) net.evolve();
    for (int u = 0; u < users; ++u) profiles[static_cast<std::size_t>(u)] = learners[static_cast<std::size_t>(u)].profile();
    for (int u = 0; u < users; ++u) {
      const auto su = static_cast<std::size_t>(u);
      EffectiveChannel h;
      LossEvaluation ev;
      try {
        h = net.effective(u, profiles);
        ev = evaluate_loss(profiles[su], h, shapers[su]);
      } catch (const NotPositiveDefinite& e) {
        throw NumericOverflow("frame " + std::to_string(n) + ", user " + std::to_string(u) + ": " + e.what());
      }
      FrameRecord rec;
      rec.rate = ev.rate;
      rec.loss = ev.loss;
      rec.power_w = profiles[su].trace();
      rec.chan_gain = net.link(u, u).gain();
      rec.grad_norm = spectral_norm(ev.gradient.blocks);
      if (opt.moment_draws > 0 && noise[su].kind != NoiseModel::Kind::none)
        rec.noisy_second_moment = detail::noisy_second_moment(ev.gradient, noise[su], moment_rng[su], opt.moment_draws);
      out.records[su].push_back(rec);
      if (opt.keep_history) out.histories[su].frames.push_back({h, shapers[su], profiles[su], ev.loss});
      observed[su] = perturb_gradient(ev.gradient, noise[su], noise_rng[su]);
    }
    // Learners see only their own feedback; updates happen after every
    // receiver has measured, so the iteration order is irrelevant.
    for (int u = 0; u < users; ++u) {
      const auto su = static_cast<std::size_t>(u);
      pending[su].push_back(std::move(observed[su]));
      if (static_cast<int>(pending[su].size()) <= c.feedback_delay) continue;
      GradientMatrix g = std::move(pending[su].front());
      pending[su].pop_front();
      const double p = c.users[su].update_probability;
      if (p < 1.0 && std::uniform_real_distribution<double>(0.0, 1.0)(async_rng[su]) >= p) continue;
      try {
        learners[su].update(g);
      } catch (const NumericOverflow& e) {
        throw NumericOverflow("frame " + std::to_string(n) + ", user " + std::to_string(u) + ": " + e.what());
      }
    }
  }
  return out;
}

// Resolved learner and bound parameters of one user.
struct UserCalibration {
  double eta = 0.0;
  double vbar = 0.0;          // 1.2 x pilot max ||V||
  double sigma = 0.0;         // absolute noise scale (spectral)
  double vbar_noisy = 0.0;    // 1.2 x sqrt(pilot max E||V + Xi||^2); equals vbar when noiseless
  bool eta_auto = true;
};

inline constexpr int kPilotMomentDraws = 64;

// Pilot run: measures V-bar per user with exact gradients, resolves "auto"
// step sizes with optimal_eta, and converts relative noise levels into
// absolute ones. The pilot freezes every user in place.
inline std::vector<UserCalibration> calibrate(const ScenarioConfig& config) {
  ScenarioConfig c = config;
  for (auto& u : c.users) u.speed_kmh = 0.0;
  const int users = c.num_users();
  std::vector<UserCalibration> cal(static_cast<std::size_t>(users));
  const int m = c.tx_antennas;
  const int k = c.subcarriers;
  std::vector<NoiseModel> none(static_cast<std::size_t>(users));

  // Frame-1 gradient norms seed the pilot's own step sizes.
  auto first = play(c, std::vector<double>(static_cast<std::size_t>(users), 1.0), none, {1, false, 0});
  std::vector<double> pilot_eta;
  for (int u = 0; u < users; ++u) {
    const auto& uc = c.users[static_cast<std::size_t>(u)];
    const double v1 = std::max(first.records[static_cast<std::size_t>(u)][0].grad_norm, 1e-12);
    pilot_eta.push_back(uc.eta ? *uc.eta : optimal_eta(kGradientSafetyFactor * v1, k, m));
  }
  const int frames = std::min(c.pilot_frames, c.n_frames);
  auto pilot = play(c, pilot_eta, none, {frames, true, 0});
  for (int u = 0; u < users; ++u) {
    const auto su = static_cast<std::size_t>(u);
    const auto& uc = c.users[su];
    double top = 0.0;
    for (const auto& r : pilot.records[su]) top = std::max(top, r.grad_norm);
    auto& cu = cal[su];
    cu.vbar = kGradientSafetyFactor * std::max(top, 1e-12);
    cu.sigma = uc.csi_noise_sigma_vbar * cu.vbar;
    cu.vbar_noisy = cu.vbar;
    if (cu.sigma > 0.0) {
      const NoiseModel noise = NoiseModel::gaussian(cu.sigma);
      Rng rng = make_stream(c.master_seed, streams::kPilotNoise + static_cast<std::uint64_t>(u));
      double m2 = 0.0;
      for (const auto& f : pilot.histories[su].frames) {
        const auto v = evaluate_loss(f.played, f.channel, f.shaper).gradient;
        m2 = std::max(m2, detail::noisy_second_moment(v, noise, rng, kPilotMomentDraws));
      }
      cu.vbar_noisy = kGradientSafetyFactor * std::sqrt(m2);
    }
    cu.eta_auto = !uc.eta.has_value();
    cu.eta = uc.eta ? *uc.eta : optimal_eta(cu.vbar_noisy, k, m);
  }
  return cal;
}

struct FrameMetrics {
  int frame = 0;  // 1-based
  int user = 0;   // 0-based
  double loss_w = 0.0;
  double power_w = 0.0;
  double power_dbm = 0.0;
  double rate_bps = 0.0;
  double rate_ratio = 0.0;
  double cum_regret = 0.0;
  double avg_regret = 0.0;
  double bound = 0.0;  // bound on the average regret after `frame` frames
  double chan_gain = 0.0;
};

struct UserAudit {
  int user = 0;
  double eta = 0.0;
  double vbar_bound = 0.0;  // V-bar (or its noisy counterpart) used in the bound
  double final_cum_regret = 0.0;
  double final_avg_regret = 0.0;
  double final_bound = 0.0;
  // Largest avg_regret + 1% |avg_regret| - bound over all T (<= 0 means respected).
  double worst_bound_excess = 0.0;
  bool bound_respected = true;
  // First T whose average regret is certified <= 0 by an exact solve.
  std::optional<int> first_nonpositive_frame;
  double q_star_power_w = 0.0;
};

struct SimulationResult {
  ScenarioConfig config;
  std::vector<UserCalibration> calibration;
  std::vector<std::vector<FrameRecord>> records;
  std::vector<FrameMetrics> metrics;  // frame-major, users in index order
  std::vector<LossHistory> histories;
  std::vector<RegretCurve> curves;
  std::vector<UserAudit> audit;
};

struct SimulationOptions {
  bool audit = true;
  bool keep_history = true;
  int moment_draws = 16;
  RegretCurveOptions regret;
  int max_certify_solves = 40;
};

inline constexpr double kSolverSlack = 0.01;

namespace detail {

inline std::optional<int> certify_first_nonpositive(const LossHistory& h, const std::vector<double>& cum_estimate,
                                                    const HindsightOptions& opt, int budget) {
  double played = 0.0;
  std::vector<double> prefix;
  prefix.reserve(h.frames.size());
  for (const auto& f : h.frames) prefix.push_back(played += f.loss);
  for (std::size_t t = 0; t < cum_estimate.size() && budget > 0; ++t) {
    if (cum_estimate[t] > 0.0) continue;
    --budget;
    const auto sol = best_fixed_profile(h, opt, static_cast<int>(t + 1));
    const double upper = prefix[t] - (sol.cumulative_loss - sol.gap_bound);
    if (upper <= 0.0) return static_cast<int>(t + 1);
  }
  return std::nullopt;
}

}  // namespace detail

inline SimulationResult run_simulation(const ScenarioConfig& config, const SimulationOptions& opt = {}) {
  validate(config);
  SimulationResult res;
  res.config = config;
  res.calibration = calibrate(config);
  const int users = config.num_users();
  std::vector<double> eta;
  std::vector<NoiseModel> noise;
  for (const auto& cu : res.calibration) {
    eta.push_back(cu.eta);
    noise.push_back(cu.sigma > 0.0 ? NoiseModel::gaussian(cu.sigma) : NoiseModel::none());
  }
  auto played = play(config, eta, noise, {config.n_frames, opt.keep_history || opt.audit, opt.moment_draws});
  res.records = std::move(played.records);
  res.histories = std::move(played.histories);

  const int k = config.subcarriers;
  const int m = config.tx_antennas;
  std::vector<double> vbar_bound(static_cast<std::size_t>(users));
  for (int u = 0; u < users; ++u) {
    const auto su = static_cast<std::size_t>(u);
    const auto& cu = res.calibration[su];
    double top = 0.0;
    double m2 = 0.0;
    for (const auto& r : res.records[su]) {
      top = std::max(top, r.grad_norm);
      m2 = std::max(m2, r.noisy_second_moment);
    }
    // The bound needs V-bar to dominate the gradients actually seen.
    vbar_bound[su] = cu.sigma > 0.0 ? std::max(cu.vbar_noisy, std::sqrt(m2)) : std::max(cu.vbar, top);
  }

  if (opt.audit) {
    for (int u = 0; u < users; ++u) res.curves.push_back(regret_curve(res.histories[static_cast<std::size_t>(u)], opt.regret));
  }

  res.metrics.reserve(static_cast<std::size_t>(users * config.n_frames));
  for (int n = 1; n <= config.n_frames; ++n) {
    for (int u = 0; u < users; ++u) {
      const auto su = static_cast<std::size_t>(u);
      const auto& uc = config.users[su];
      const auto& r = res.records[su][static_cast<std::size_t>(n - 1)];
      FrameMetrics fm;
      fm.frame = n;
      fm.user = u;
      fm.loss_w = r.loss;
      fm.power_w = r.power_w;
      fm.power_dbm = watts_to_dbm(r.power_w);
      fm.rate_bps = rate_to_bps(r.rate, config.subcarrier_bw_hz);
      fm.rate_ratio = r.rate / user_target_rate(config, uc);
      if (opt.audit) {
        fm.cum_regret = res.curves[su].cumulative[static_cast<std::size_t>(n - 1)];
        fm.avg_regret = fm.cum_regret / n;
      }
      fm.bound = regret_bound(n, res.calibration[su].eta, user_pmax_w(uc), vbar_bound[su], k, m);
      fm.chan_gain = r.chan_gain;
      res.metrics.push_back(fm);
    }
  }

  if (opt.audit) {
    for (int u = 0; u < users; ++u) {
      const auto su = static_cast<std::size_t>(u);
      UserAudit a;
      a.user = u;
      a.eta = res.calibration[su].eta;
      a.vbar_bound = vbar_bound[su];
      a.worst_bound_excess = -std::numeric_limits<double>::infinity();
      for (int n = 1; n <= config.n_frames; ++n) {
        const auto& fm = res.metrics[static_cast<std::size_t>((n - 1) * users + u)];
        const double excess = fm.avg_regret + kSolverSlack * std::abs(fm.avg_regret) - fm.bound;
        a.worst_bound_excess = std::max(a.worst_bound_excess, excess);
      }
      a.bound_respected = a.worst_bound_excess <= 0.0;
      const auto& last = res.metrics[static_cast<std::size_t>((config.n_frames - 1) * users + u)];
      a.final_cum_regret = last.cum_regret;
      a.final_avg_regret = last.avg_regret;
      a.final_bound = last.bound;
      a.first_nonpositive_frame = detail::certify_first_nonpositive(res.histories[su], res.curves[su].cumulative,
                                                                    opt.regret.solver, opt.max_certify_solves);
      a.q_star_power_w = res.curves[su].anchor_profiles.back().trace();
      res.audit.push_back(a);
    }
  }
  return res;
}

}  // namespace mxl
