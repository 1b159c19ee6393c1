#pragma once

// Network description: physical parameters, user placement in a 19-cell
// hexagonal layout, learner and noise settings, presets and JSON loading.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mxl/channel.hpp"
#include "mxl/errors.hpp"
#include "mxl/objective.hpp"

namespace mxl {

struct UserConfig {
  double x_m = 0.0;
  double y_m = 0.0;
  int cell_id = 0;
  double speed_kmh = 0.0;
  double pmax_dbm = 40.0;
  double target_rate_kbps = 500.0;
  // watts per nat; empty means (default factor) * pmax / R*
  std::optional<double> tolerance_w_per_nat;
  double default_tolerance_factor = 1.0;
  // empty means "auto"
  std::optional<double> eta;
  double csi_noise_sigma_vbar = 0.0;
  double update_probability = 1.0;
};

struct ScenarioConfig {
  std::string preset = "custom";
  int subcarriers = 8;
  double subcarrier_bw_hz = 10937.5;
  double freq_hz = 2.5e9;
  double frame_duration_s = 0.005;
  int n_frames = 100;
  int tx_antennas = 2;
  int rx_antennas = 2;
  double noise_psd_dbm_hz = -174.0;
  double noise_figure_db = 7.0;
  double shadowing_db = 8.9;
  double bs_height_m = 32.0;
  double ms_height_m = 1.5;
  double cell_radius_m = 1000.0;
  int num_cells = 19;
  std::uint64_t master_seed = 1;
  int feedback_delay = 0;
  int pilot_frames = 100;
  std::vector<UserConfig> users;

  int num_users() const { return static_cast<int>(users.size()); }
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w * 1000.0); }

inline double user_pmax_w(const UserConfig& u) { return dbm_to_watts(u.pmax_dbm); }

inline double user_target_rate(const ScenarioConfig& c, const UserConfig& u) {
  return bps_to_rate(u.target_rate_kbps * 1000.0, c.subcarrier_bw_hz);
}

inline double user_tolerance(const ScenarioConfig& c, const UserConfig& u) {
  if (u.tolerance_w_per_nat) return *u.tolerance_w_per_nat;
  return u.default_tolerance_factor * user_pmax_w(u) / user_target_rate(c, u);
}

inline RateShaper user_shaper(const ScenarioConfig& c, const UserConfig& u) {
  return RateShaper::soft_target(user_target_rate(c, u), user_tolerance(c, u));
}

// Base-station coordinates of a hexagonal layout: one centre cell, then
// rings of 6, 12, ... cells. Adjacent sites are sqrt(3) * radius apart.
inline std::vector<std::pair<double, double>> hex_cell_centers(int count, double radius_m) {
  static constexpr int kDir[6][2] = {{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}};
  std::vector<std::pair<int, int>> axial{{0, 0}};
  for (int ring = 1; static_cast<int>(axial.size()) < count; ++ring) {
    int q = kDir[4][0] * ring;
    int r = kDir[4][1] * ring;
    for (int side = 0; side < 6; ++side)
      for (int step = 0; step < ring; ++step) {
        axial.emplace_back(q, r);
        q += kDir[side][0];
        r += kDir[side][1];
      }
  }
  axial.resize(static_cast<std::size_t>(count));
  std::vector<std::pair<double, double>> out;
  out.reserve(axial.size());
  for (auto [q, r] : axial)
    out.emplace_back(std::sqrt(3.0) * radius_m * (q + r / 2.0), 1.5 * radius_m * r);
  return out;
}

namespace presets {

inline constexpr double kTableTargetsKbps[4] = {764.6, 113.7, 909.3, 1081.3};
inline constexpr double kTablePmaxDbm[4] = {40.40, 41.10, 42.85, 45.58};
inline constexpr double kToleranceFactors[4] = {6.472, 0.058, 6.503, 12.888};

// Transmitter offsets (metres) from their serving base station. Cells 0..3
// are the centre cell and three consecutive first-ring neighbours.
inline constexpr double kOffsets[4][2] = {{-63.0, -314.0}, {-779.0, -627.0}, {-483.0, -197.0}, {-93.0, 435.0}};

inline ScenarioConfig table_defaults() {
  ScenarioConfig c;
  const auto centers = hex_cell_centers(c.num_cells, c.cell_radius_m);
  for (int u = 0; u < 4; ++u) {
    UserConfig user;
    user.cell_id = u;
    user.x_m = centers[static_cast<std::size_t>(u)].first + kOffsets[u][0];
    user.y_m = centers[static_cast<std::size_t>(u)].second + kOffsets[u][1];
    user.pmax_dbm = kTablePmaxDbm[u];
    user.target_rate_kbps = kTableTargetsKbps[u];
    user.default_tolerance_factor = kToleranceFactors[u];
    c.users.push_back(user);
  }
  return c;
}

inline ScenarioConfig static_preset() {
  ScenarioConfig c = table_defaults();
  c.preset = "static";
  c.n_frames = 100;
  return c;
}

inline ScenarioConfig noisy_static_preset() {
  ScenarioConfig c = table_defaults();
  c.preset = "noisy-static";
  c.n_frames = 500;
  constexpr double sigma[4] = {0.5, 1.0, 0.5, 1.0};
  for (int u = 0; u < 4; ++u) c.users[static_cast<std::size_t>(u)].csi_noise_sigma_vbar = sigma[u];
  return c;
}

inline ScenarioConfig mobile_preset() {
  ScenarioConfig c = table_defaults();
  c.preset = "mobile";
  c.n_frames = 1000;
  constexpr double speed[4] = {2.0, 30.0, 130.0, 30.0};
  for (int u = 0; u < 4; ++u) c.users[static_cast<std::size_t>(u)].speed_kmh = speed[u];
  return c;
}

inline std::vector<std::string> names() { return {"static", "noisy-static", "mobile"}; }

}  // namespace presets

inline ScenarioConfig preset_config(const std::string& name) {
  if (name == "static") return presets::static_preset();
  if (name == "noisy-static") return presets::noisy_static_preset();
  if (name == "mobile") return presets::mobile_preset();
  throw InvalidInput("unknown preset '" + name + "' (expected static, noisy-static or mobile)");
}

// Every violated constraint, one message each. Empty when valid.
inline std::vector<std::string> validation_errors(const ScenarioConfig& c) {
  std::vector<std::string> errs;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };
  need(c.subcarriers >= 1, "subcarriers: must be >= 1");
  need(c.subcarrier_bw_hz > 0.0, "subcarrier_bw_hz: must be positive");
  need(c.freq_hz > 0.0, "freq_hz: must be positive");
  need(c.frame_duration_s > 0.0, "frame_duration_s: must be positive");
  need(c.n_frames >= 1, "n_frames: must be >= 1");
  need(c.tx_antennas >= 1 && c.tx_antennas <= kMaxDim, "tx_antennas: must be in [1, 8]");
  need(c.rx_antennas >= 1 && c.rx_antennas <= kMaxDim, "rx_antennas: must be in [1, 8]");
  need(std::isfinite(c.noise_psd_dbm_hz), "noise_psd_dbm_hz: must be finite");
  need(std::isfinite(c.noise_figure_db), "noise_figure_db: must be finite");
  need(noise_power_w(c.noise_psd_dbm_hz, c.noise_figure_db, c.subcarrier_bw_hz) > 0.0,
       "noise_psd_dbm_hz: noise power underflows to zero");
  need(c.shadowing_db >= 0.0, "shadowing_db: must be nonnegative");
  need(c.bs_height_m > 0.0, "bs_height_m: must be positive");
  need(c.ms_height_m > 0.0, "ms_height_m: must be positive");
  need(c.cell_radius_m > 0.0, "cell_radius_m: must be positive");
  need(c.num_cells >= 1, "num_cells: must be >= 1");
  need(c.feedback_delay >= 0, "feedback_delay: must be nonnegative");
  need(c.pilot_frames >= 1, "pilot_frames: must be >= 1");
  need(!c.users.empty(), "users: at least one user required");
  for (std::size_t i = 0; i < c.users.size(); ++i) {
    const auto& u = c.users[i];
    const std::string p = "users[" + std::to_string(i) + "].";
    need(std::isfinite(u.x_m) && std::isfinite(u.y_m), p + "position_m: must be finite");
    need(u.cell_id >= 0 && u.cell_id < c.num_cells, p + "cell_id: outside [0, num_cells)");
    need(u.speed_kmh >= 0.0, p + "speed_kmh: must be nonnegative");
    need(std::isfinite(u.pmax_dbm) && std::isfinite(user_pmax_w(u)), p + "pmax_dbm: must give a finite power");
    need(u.target_rate_kbps > 0.0, p + "target_rate_kbps: must be positive");
    need(!u.tolerance_w_per_nat || *u.tolerance_w_per_nat >= 0.0, p + "tolerance_w_per_nat: must be nonnegative");
    need(!u.eta || *u.eta > 0.0, p + "eta: must be positive or \"auto\"");
    need(u.csi_noise_sigma_vbar >= 0.0, p + "csi_noise_sigma_vbar: must be nonnegative");
    need(u.update_probability > 0.0 && u.update_probability <= 1.0, p + "update_probability: must be in (0, 1]");
  }
  return errs;
}

inline void validate(const ScenarioConfig& c) {
  const auto errs = validation_errors(c);
  if (errs.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& e : errs) msg += "\n  " + e;
  throw ValidationError(msg);
}

namespace detail {

using nlohmann::json;

template <class T>
void read_field(const json& j, const char* key, T& out, std::vector<std::string>& errs, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    errs.push_back(ctx + key + ": wrong type");
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, std::vector<std::string>& errs,
                           const std::string& ctx) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) known = known || it.key() == a;
    if (!known) errs.push_back(ctx + it.key() + ": unknown key");
  }
}

inline void merge_user(const json& j, UserConfig& u, std::vector<std::string>& errs, const std::string& ctx) {
  if (!j.is_object()) {
    errs.push_back(ctx + ": expected an object");
    return;
  }
  reject_unknown(j,
                 {"position_m", "cell_id", "speed_kmh", "pmax_dbm", "target_rate_kbps", "tolerance_w_per_nat",
                  "eta", "csi_noise_sigma_vbar", "update_probability"},
                 errs, ctx + ".");
  if (auto it = j.find("position_m"); it != j.end()) {
    if (it->is_array() && it->size() == 2 && (*it)[0].is_number() && (*it)[1].is_number()) {
      u.x_m = (*it)[0].get<double>();
      u.y_m = (*it)[1].get<double>();
    } else {
      errs.push_back(ctx + ".position_m: expected [x, y]");
    }
  }
  read_field(j, "cell_id", u.cell_id, errs, ctx + ".");
  read_field(j, "speed_kmh", u.speed_kmh, errs, ctx + ".");
  read_field(j, "pmax_dbm", u.pmax_dbm, errs, ctx + ".");
  read_field(j, "target_rate_kbps", u.target_rate_kbps, errs, ctx + ".");
  read_field(j, "csi_noise_sigma_vbar", u.csi_noise_sigma_vbar, errs, ctx + ".");
  read_field(j, "update_probability", u.update_probability, errs, ctx + ".");
  if (auto it = j.find("tolerance_w_per_nat"); it != j.end()) {
    if (it->is_number()) u.tolerance_w_per_nat = it->get<double>();
    else if (it->is_null()) u.tolerance_w_per_nat.reset();
    else errs.push_back(ctx + ".tolerance_w_per_nat: expected a number");
  }
  if (auto it = j.find("eta"); it != j.end()) {
    if (it->is_number()) u.eta = it->get<double>();
    else if (it->is_string() && it->get<std::string>() == "auto") u.eta.reset();
    else errs.push_back(ctx + ".eta: expected a number or \"auto\"");
  }
}

inline std::string parse_context(const std::string& text, std::size_t byte) {
  int line = 1;
  int col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

// Applies the keys of a JSON object to a config. Unknown keys and type
// errors are collected and reported together.
inline ScenarioConfig apply_overrides(ScenarioConfig c, const nlohmann::json& j) {
  using detail::read_field;
  std::vector<std::string> errs;
  if (!j.is_object()) throw ParseError("configuration root must be an object");
  detail::reject_unknown(j,
                         {"preset", "subcarriers", "subcarrier_bw_hz", "freq_hz", "frame_duration_s", "n_frames",
                          "tx_antennas", "rx_antennas", "noise_psd_dbm_hz", "noise_figure_db", "shadowing_db",
                          "bs_height_m", "ms_height_m", "cell_radius_m", "num_cells", "master_seed",
                          "feedback_delay", "pilot_frames", "users"},
                         errs, "");
  read_field(j, "subcarriers", c.subcarriers, errs, "");
  read_field(j, "subcarrier_bw_hz", c.subcarrier_bw_hz, errs, "");
  read_field(j, "freq_hz", c.freq_hz, errs, "");
  read_field(j, "frame_duration_s", c.frame_duration_s, errs, "");
  read_field(j, "n_frames", c.n_frames, errs, "");
  read_field(j, "tx_antennas", c.tx_antennas, errs, "");
  read_field(j, "rx_antennas", c.rx_antennas, errs, "");
  read_field(j, "noise_psd_dbm_hz", c.noise_psd_dbm_hz, errs, "");
  read_field(j, "noise_figure_db", c.noise_figure_db, errs, "");
  read_field(j, "shadowing_db", c.shadowing_db, errs, "");
  read_field(j, "bs_height_m", c.bs_height_m, errs, "");
  read_field(j, "ms_height_m", c.ms_height_m, errs, "");
  read_field(j, "cell_radius_m", c.cell_radius_m, errs, "");
  read_field(j, "num_cells", c.num_cells, errs, "");
  read_field(j, "master_seed", c.master_seed, errs, "");
  read_field(j, "feedback_delay", c.feedback_delay, errs, "");
  read_field(j, "pilot_frames", c.pilot_frames, errs, "");
  if (auto it = j.find("users"); it != j.end()) {
    if (!it->is_array()) {
      errs.push_back("users: expected an array");
    } else {
      // Entries overlay the preset's users by index; extra entries start from defaults.
      std::vector<UserConfig> users;
      for (std::size_t i = 0; i < it->size(); ++i) {
        UserConfig u = i < c.users.size() ? c.users[i] : UserConfig{};
        detail::merge_user((*it)[i], u, errs, "users[" + std::to_string(i) + "]");
        users.push_back(u);
      }
      c.users = std::move(users);
    }
  }
  if (!errs.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  return c;
}

// Parses a config document. A "preset" key (or the preset argument) selects
// the base; every other key overrides it.
inline ScenarioConfig parse_config(const std::string& text, const std::optional<std::string>& preset = std::nullopt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed configuration at " + detail::parse_context(text, e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("configuration root must be an object");
  std::string base = preset.value_or("");
  if (base.empty()) {
    if (auto it = j.find("preset"); it != j.end()) {
      if (!it->is_string()) throw ValidationError("invalid configuration:\n  preset: expected a string");
      base = it->get<std::string>();
    }
  }
  ScenarioConfig c = base.empty() ? presets::table_defaults() : preset_config(base);
  if (base.empty()) c.preset = "custom";
  c = apply_overrides(std::move(c), j);
  validate(c);
  return c;
}

inline ScenarioConfig load_config(const std::string& path, const std::optional<std::string>& preset = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), preset);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// MXLSIM_SEED, when set, replaces master_seed. Returns true if applied.
inline bool apply_seed_env(ScenarioConfig& c) {
  const char* env = std::getenv("MXLSIM_SEED");
  if (env == nullptr || *env == '\0') return false;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == nullptr || *end != '\0') throw ValidationError("MXLSIM_SEED: not an unsigned integer: " + std::string(env));
  c.master_seed = v;
  return true;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["preset"] = c.preset;
  j["subcarriers"] = c.subcarriers;
  j["subcarrier_bw_hz"] = c.subcarrier_bw_hz;
  j["freq_hz"] = c.freq_hz;
  j["frame_duration_s"] = c.frame_duration_s;
  j["n_frames"] = c.n_frames;
  j["tx_antennas"] = c.tx_antennas;
  j["rx_antennas"] = c.rx_antennas;
  j["noise_psd_dbm_hz"] = c.noise_psd_dbm_hz;
  j["noise_figure_db"] = c.noise_figure_db;
  j["shadowing_db"] = c.shadowing_db;
  j["bs_height_m"] = c.bs_height_m;
  j["ms_height_m"] = c.ms_height_m;
  j["cell_radius_m"] = c.cell_radius_m;
  j["num_cells"] = c.num_cells;
  j["master_seed"] = c.master_seed;
  j["feedback_delay"] = c.feedback_delay;
  j["pilot_frames"] = c.pilot_frames;
  j["users"] = nlohmann::json::array();
  for (const auto& u : c.users) {
    nlohmann::json ju;
    ju["position_m"] = {u.x_m, u.y_m};
    ju["cell_id"] = u.cell_id;
    ju["speed_kmh"] = u.speed_kmh;
    ju["pmax_dbm"] = u.pmax_dbm;
    ju["target_rate_kbps"] = u.target_rate_kbps;
    ju["tolerance_w_per_nat"] = user_tolerance(c, u);
    if (u.eta) ju["eta"] = *u.eta;
    else ju["eta"] = "auto";
    ju["csi_noise_sigma_vbar"] = u.csi_noise_sigma_vbar;
    ju["update_probability"] = u.update_probability;
    j["users"].push_back(ju);
  }
  return j;
}

}  // namespace mxl
