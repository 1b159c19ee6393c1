#pragma once

// Metrics files (CSV or JSONL, one row per frame and user) and the snapshot
// sidecar holding every played profile and effective channel, which lets
// `audit` recompute losses, regret and bounds from a saved run.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mxl/errors.hpp"
#include "mxl/hindsight.hpp"
#include "mxl/learner.hpp"
#include "mxl/objective.hpp"
#include "mxl/scenario.hpp"
#include "mxl/simulation.hpp"

namespace mxl {

enum class MetricsFormat { csv, jsonl };

inline MetricsFormat parse_format(const std::string& s) {
  if (s == "csv") return MetricsFormat::csv;
  if (s == "jsonl") return MetricsFormat::jsonl;
  throw InvalidInput("unknown metrics format '" + s + "' (expected csv or jsonl)");
}

inline constexpr const char* kMetricsColumns[] = {"frame",    "user",       "loss_w",     "power_dbm", "rate_bps",
                                                  "rate_ratio", "cum_regret", "avg_regret", "bound",     "chan_gain"};

namespace detail {

inline std::string g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<double> row_values(const FrameMetrics& m) {
  return {m.loss_w, m.power_dbm, m.rate_bps, m.rate_ratio, m.cum_regret, m.avg_regret, m.bound, m.chan_gain};
}

inline FrameMetrics from_values(int frame, int user, const std::vector<double>& v) {
  FrameMetrics m;
  m.frame = frame;
  m.user = user;
  m.loss_w = v[0];
  m.power_dbm = v[1];
  m.power_w = dbm_to_watts(v[1]);
  m.rate_bps = v[2];
  m.rate_ratio = v[3];
  m.cum_regret = v[4];
  m.avg_regret = v[5];
  m.bound = v[6];
  m.chan_gain = v[7];
  return m;
}

inline double parse_number(const std::string& s, int line, const char* column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size())
    throw ParseError("line " + std::to_string(line) + ", column " + column + ": not a number: '" + s + "'");
  return v;
}

inline int parse_index(const std::string& s, int line, const char* column) {
  const double v = parse_number(s, line, column);
  if (v != std::floor(v) || v < 0 || v > 1e9)
    throw ParseError("line " + std::to_string(line) + ", column " + column + ": not an index: '" + s + "'");
  return static_cast<int>(v);
}

}  // namespace detail

inline std::string format_metrics(std::span<const FrameMetrics> metrics, MetricsFormat format) {
  std::string out;
  if (format == MetricsFormat::csv) {
    for (std::size_t i = 0; i < std::size(kMetricsColumns); ++i) {
      if (i) out += ',';
      out += kMetricsColumns[i];
    }
    out += '\n';
  }
  for (const auto& m : metrics) {
    const auto v = detail::row_values(m);
    if (format == MetricsFormat::csv) {
      out += std::to_string(m.frame) + ',' + std::to_string(m.user);
      for (double x : v) out += ',' + detail::g17(x);
    } else {
      out += "{\"frame\":" + std::to_string(m.frame) + ",\"user\":" + std::to_string(m.user);
      for (std::size_t i = 0; i < v.size(); ++i) out += ",\"" + std::string(kMetricsColumns[i + 2]) + "\":" + detail::g17(v[i]);
      out += '}';
    }
    out += '\n';
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  f.flush();
  if (!f) throw IoError("write to '" + path + "' failed");
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void emit_metrics(std::span<const FrameMetrics> metrics, const std::string& path, MetricsFormat format) {
  write_text(path, format_metrics(metrics, format));
}

// Accepts either format; JSONL is recognized by a leading '{'.
inline std::vector<FrameMetrics> parse_metrics(const std::string& text) {
  std::vector<FrameMetrics> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
      }
      std::vector<double> v;
      for (std::size_t i = 2; i < std::size(kMetricsColumns); ++i) {
        const auto it = j.find(kMetricsColumns[i]);
        if (it == j.end() || !it->is_number())
          throw ParseError("line " + std::to_string(lineno) + ": missing or non-numeric key '" + kMetricsColumns[i] + "'");
        v.push_back(it->get<double>());
      }
      if (!j.contains("frame") || !j["frame"].is_number_integer() || !j.contains("user") || !j["user"].is_number_integer())
        throw ParseError("line " + std::to_string(lineno) + ": frame and user must be integers");
      rows.push_back(detail::from_values(j["frame"].get<int>(), j["user"].get<int>(), v));
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      header_seen = true;
      bool ok = cells.size() == std::size(kMetricsColumns);
      for (std::size_t i = 0; ok && i < cells.size(); ++i) ok = cells[i] == kMetricsColumns[i];
      if (!ok) throw ParseError("line " + std::to_string(lineno) + ": unexpected CSV header");
      continue;
    }
    if (cells.size() != std::size(kMetricsColumns))
      throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(std::size(kMetricsColumns)) +
                       " columns, got " + std::to_string(cells.size()));
    std::vector<double> v;
    for (std::size_t i = 2; i < cells.size(); ++i) v.push_back(detail::parse_number(cells[i], lineno, kMetricsColumns[i]));
    rows.push_back(detail::from_values(detail::parse_index(cells[0], lineno, "frame"),
                                       detail::parse_index(cells[1], lineno, "user"), v));
  }
  return rows;
}

inline std::vector<FrameMetrics> read_metrics(const std::string& path) {
  try {
    return parse_metrics(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Snapshot sidecar

inline std::string snapshots_path(const std::string& metrics_path) { return metrics_path + ".snapshots.jsonl"; }

namespace detail {

inline nlohmann::json flatten(const CMatrix& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      a.push_back(m(i, j).real());
      a.push_back(m(i, j).imag());
    }
  return a;
}

inline CMatrix unflatten(const nlohmann::json& a, std::size_t offset, int rows, int cols) {
  CMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const std::size_t at = offset + 2 * static_cast<std::size_t>(i * cols + j);
      m(i, j) = cplx(a.at(at).get<double>(), a.at(at + 1).get<double>());
    }
  return m;
}

}  // namespace detail

inline std::string format_snapshots(const SimulationResult& res) {
  const auto& c = res.config;
  nlohmann::json head;
  head["kind"] = "header";
  head["subcarriers"] = c.subcarriers;
  head["rx_antennas"] = c.rx_antennas;
  head["tx_antennas"] = c.tx_antennas;
  head["frames"] = c.n_frames;
  head["config"] = to_json(c);
  head["users"] = nlohmann::json::array();
  for (std::size_t u = 0; u < res.calibration.size(); ++u) {
    nlohmann::json ju;
    ju["eta"] = res.calibration[u].eta;
    ju["vbar_bound"] = u < res.audit.size() ? res.audit[u].vbar_bound : res.calibration[u].vbar_noisy;
    head["users"].push_back(ju);
  }
  std::string out = head.dump() + '\n';
  if (res.histories.empty()) throw InvalidInput("format_snapshots: run kept no history");
  for (int n = 0; n < c.n_frames; ++n) {
    for (int u = 0; u < c.num_users(); ++u) {
      const auto& f = res.histories[static_cast<std::size_t>(u)].frames[static_cast<std::size_t>(n)];
      nlohmann::json j;
      j["frame"] = n + 1;
      j["user"] = u;
      j["chan_gain"] = res.records[static_cast<std::size_t>(u)][static_cast<std::size_t>(n)].chan_gain;
      nlohmann::json h = nlohmann::json::array();
      nlohmann::json q = nlohmann::json::array();
      for (const auto& b : f.channel.blocks)
        for (auto& x : detail::flatten(b)) h.push_back(x);
      for (const auto& b : f.played.blocks().blocks)
        for (auto& x : detail::flatten(b.matrix())) q.push_back(x);
      j["h"] = std::move(h);
      j["q"] = std::move(q);
      out += j.dump() + '\n';
    }
  }
  return out;
}

struct SnapshotUser {
  double eta = 0.0;
  double vbar_bound = 0.0;
  std::vector<EffectiveChannel> channels;  // per frame
  std::vector<BlockDiagHermitian> played;  // per frame, unvalidated
  std::vector<double> chan_gain;
};

struct Snapshots {
  int subcarriers = 0;
  int rx_antennas = 0;
  int tx_antennas = 0;
  int frames = 0;
  std::vector<SnapshotUser> users;
};

inline Snapshots parse_snapshots(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Snapshots s;
  bool have_header = false;
  auto fail = [&](const std::string& what) { throw ParseError("line " + std::to_string(lineno) + ": " + what); };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(e.what());
    }
    try {
      if (!have_header) {
        if (j.value("kind", "") != "header") fail("first record must be the header");
        have_header = true;
        s.subcarriers = j.at("subcarriers").get<int>();
        s.rx_antennas = j.at("rx_antennas").get<int>();
        s.tx_antennas = j.at("tx_antennas").get<int>();
        s.frames = j.at("frames").get<int>();
        for (const auto& ju : j.at("users")) {
          SnapshotUser su;
          su.eta = ju.at("eta").get<double>();
          su.vbar_bound = ju.at("vbar_bound").get<double>();
          s.users.push_back(std::move(su));
        }
        continue;
      }
      const int frame = j.at("frame").get<int>();
      const int user = j.at("user").get<int>();
      if (user < 0 || user >= static_cast<int>(s.users.size())) fail("user index out of range");
      auto& su = s.users[static_cast<std::size_t>(user)];
      if (frame != static_cast<int>(su.channels.size()) + 1) fail("frames out of order for user " + std::to_string(user));
      const auto& h = j.at("h");
      const auto& q = j.at("q");
      const std::size_t hb = 2 * static_cast<std::size_t>(s.rx_antennas * s.tx_antennas);
      const std::size_t qb = 2 * static_cast<std::size_t>(s.tx_antennas * s.tx_antennas);
      if (h.size() != hb * static_cast<std::size_t>(s.subcarriers) || q.size() != qb * static_cast<std::size_t>(s.subcarriers))
        fail("matrix payload has the wrong size");
      EffectiveChannel ch;
      std::vector<HermitianMatrix> qs;
      for (int k = 0; k < s.subcarriers; ++k) {
        ch.blocks.push_back(detail::unflatten(h, hb * static_cast<std::size_t>(k), s.rx_antennas, s.tx_antennas));
        qs.emplace_back(detail::unflatten(q, qb * static_cast<std::size_t>(k), s.tx_antennas, s.tx_antennas));
      }
      su.channels.push_back(std::move(ch));
      su.played.emplace_back(std::move(qs));
      su.chan_gain.push_back(j.at("chan_gain").get<double>());
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    } catch (const InvalidInput& e) {
      fail(e.what());
    }
  }
  if (!have_header) throw ParseError("snapshot file is empty");
  for (std::size_t u = 0; u < s.users.size(); ++u)
    if (static_cast<int>(s.users[u].channels.size()) != s.frames)
      throw ParseError("user " + std::to_string(u) + ": expected " + std::to_string(s.frames) + " frames, found " +
                       std::to_string(s.users[u].channels.size()));
  return s;
}

inline Snapshots read_snapshots(const std::string& path) {
  try {
    return parse_snapshots(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Audit

struct AuditOptions {
  double rel_tol = 1e-9;
  RegretCurveOptions regret;
};

struct AuditReport {
  int rows_checked = 0;
  std::vector<std::string> mismatches;
  std::vector<double> final_avg_regret;  // recomputed, per user
  std::vector<double> final_bound;

  bool ok() const { return mismatches.empty(); }
};

namespace detail {

// Relative agreement; `floor` sets the magnitude below which differences are
// judged in absolute terms.
inline bool close(double a, double b, double rel, double floor) {
  return std::abs(a - b) <= rel * (floor + std::max(std::abs(a), std::abs(b)));
}

}  // namespace detail

// Recomputes every metrics column from the snapshots and the scenario, and
// lists each disagreement. Only the first few per column are spelled out.
inline AuditReport audit_metrics(std::span<const FrameMetrics> metrics, const Snapshots& snaps, const ScenarioConfig& config,
                                 const AuditOptions& opt = {}) {
  AuditReport rep;
  const int users = static_cast<int>(snaps.users.size());
  if (users != config.num_users())
    rep.mismatches.push_back("configuration has " + std::to_string(config.num_users()) + " users, snapshots have " +
                             std::to_string(users));
  if (snaps.subcarriers != config.subcarriers || snaps.tx_antennas != config.tx_antennas ||
      snaps.rx_antennas != config.rx_antennas)
    rep.mismatches.push_back("configuration dimensions differ from the snapshots");
  if (!rep.mismatches.empty()) return rep;
  if (static_cast<int>(metrics.size()) != users * snaps.frames) {
    rep.mismatches.push_back("metrics have " + std::to_string(metrics.size()) + " rows, expected " +
                             std::to_string(users * snaps.frames));
    return rep;
  }

  std::vector<LossHistory> histories(static_cast<std::size_t>(users));
  std::vector<std::vector<double>> rates(static_cast<std::size_t>(users));
  for (int u = 0; u < users; ++u) {
    const auto su = static_cast<std::size_t>(u);
    const auto& uc = config.users[su];
    const RateShaper phi = user_shaper(config, uc);
    for (int n = 0; n < snaps.frames; ++n) {
      const auto sn = static_cast<std::size_t>(n);
      PowerProfile q;
      try {
        q = PowerProfile(snaps.users[su].played[sn], user_pmax_w(uc));
      } catch (const InvalidInput& e) {
        rep.mismatches.push_back("frame " + std::to_string(n + 1) + ", user " + std::to_string(u) +
                                 ": stored profile infeasible: " + e.what());
        return rep;
      }
      const auto ev = evaluate_loss(q, snaps.users[su].channels[sn], phi);
      histories[su].frames.push_back({snaps.users[su].channels[sn], phi, q, ev.loss});
      rates[su].push_back(ev.rate);
    }
  }

  std::vector<RegretCurve> curves;
  for (const auto& h : histories) curves.push_back(regret_curve(h, opt.regret));

  std::vector<int> reported(std::size(kMetricsColumns), 0);
  auto check = [&](std::size_t col, const FrameMetrics& m, double stored, double expected, double floor) {
    if (detail::close(stored, expected, opt.rel_tol, floor)) return;
    if (++reported[col] > 5) return;
    rep.mismatches.push_back("frame " + std::to_string(m.frame) + ", user " + std::to_string(m.user) + ": " +
                             kMetricsColumns[col] + " is " + detail::g17(stored) + ", recomputed " +
                             detail::g17(expected));
  };

  std::vector<bool> seen(metrics.size(), false);
  for (const auto& m : metrics) {
    if (m.frame < 1 || m.frame > snaps.frames || m.user < 0 || m.user >= users) {
      rep.mismatches.push_back("row with frame " + std::to_string(m.frame) + ", user " + std::to_string(m.user) +
                               " is out of range");
      continue;
    }
    const auto slot = static_cast<std::size_t>((m.frame - 1) * users + m.user);
    if (seen[slot]) {
      rep.mismatches.push_back("duplicate row for frame " + std::to_string(m.frame) + ", user " + std::to_string(m.user));
      continue;
    }
    seen[slot] = true;
    const auto su = static_cast<std::size_t>(m.user);
    const auto sn = static_cast<std::size_t>(m.frame - 1);
    const auto& uc = config.users[su];
    const auto& f = histories[su].frames[sn];
    const double rate = rates[su][sn];
    const double cum = curves[su].cumulative[sn];
    const double pmax = user_pmax_w(uc);
    const double bound = regret_bound(m.frame, snaps.users[su].eta, pmax, snaps.users[su].vbar_bound,
                                      config.subcarriers, config.tx_antennas);
    check(2, m, m.loss_w, f.loss, pmax);
    check(3, m, m.power_dbm, watts_to_dbm(f.played.trace()), 1.0);
    check(4, m, m.rate_bps, rate_to_bps(rate, config.subcarrier_bw_hz), 1.0);
    check(5, m, m.rate_ratio, rate / user_target_rate(config, uc), 1e-3);
    check(6, m, m.cum_regret, cum, pmax);
    check(7, m, m.avg_regret, cum / m.frame, pmax);
    check(7, m, m.avg_regret, m.cum_regret / m.frame, pmax);
    check(8, m, m.bound, bound, 0.0);
    check(9, m, m.chan_gain, snaps.users[su].chan_gain[sn], 0.0);
    ++rep.rows_checked;
  }
  for (std::size_t col = 0; col < reported.size(); ++col)
    if (reported[col] > 5)
      rep.mismatches.push_back(std::to_string(reported[col] - 5) + " further " + kMetricsColumns[col] + " mismatches");
  for (int u = 0; u < users; ++u) {
    const auto su = static_cast<std::size_t>(u);
    rep.final_avg_regret.push_back(curves[su].cumulative.back() / snaps.frames);
    rep.final_bound.push_back(regret_bound(snaps.frames, snaps.users[su].eta, user_pmax_w(config.users[su]),
                                           snaps.users[su].vbar_bound, config.subcarriers, config.tx_antennas));
  }
  return rep;
}

}  // namespace mxl
