// mxlsim: run the multi-user power-control simulation, audit a saved run,
// or execute the property suites.
//
// Exit codes: 0 success, 1 usage/validation/audit mismatch, 2 numeric failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mxl/mxl.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNumeric = 2;

struct RunArgs {
  std::string config;
  std::string preset;
  std::optional<unsigned long long> seed;
  std::optional<int> frames;
  std::optional<int> feedback_delay;
  std::string out;
  std::string format = "csv";
  bool no_audit = false;
  bool no_snapshots = false;
};

struct AuditArgs {
  std::string metrics;
  std::string config;
  std::string preset;
  std::string snapshots;
};

mxl::ScenarioConfig resolve_config(const std::string& path, const std::string& preset) {
  const std::optional<std::string> base = preset.empty() ? std::nullopt : std::optional<std::string>(preset);
  if (!path.empty()) return mxl::load_config(path, base);
  if (base) return mxl::preset_config(*base);
  throw mxl::ValidationError("either --config or --preset is required");
}

void print_summary(const mxl::SimulationResult& res) {
  std::fprintf(stderr, "%-5s %10s %10s %12s %12s %12s %s\n", "user", "eta", "vbar", "P* (dBm)", "avg regret",
               "bound", "first T with regret <= 0");
  for (std::size_t u = 0; u < res.calibration.size(); ++u) {
    const auto& cal = res.calibration[u];
    if (res.audit.empty()) {
      std::fprintf(stderr, "%-5zu %10.4g %10.4g\n", u, cal.eta, cal.vbar);
      continue;
    }
    const auto& a = res.audit[u];
    std::string first = a.first_nonpositive_frame ? std::to_string(*a.first_nonpositive_frame) : "-";
    std::fprintf(stderr, "%-5zu %10.4g %10.4g %12.3f %12.4g %12.4g %s%s\n", u, cal.eta, a.vbar_bound,
                 mxl::watts_to_dbm(a.q_star_power_w), a.final_avg_regret, a.final_bound, first.c_str(),
                 a.bound_respected ? "" : "  (bound exceeded)");
  }
}

int cmd_run(const RunArgs& args) {
  auto config = resolve_config(args.config, args.preset);
  mxl::apply_seed_env(config);
  if (args.seed) config.master_seed = *args.seed;
  if (args.frames) config.n_frames = *args.frames;
  if (args.feedback_delay) config.feedback_delay = *args.feedback_delay;
  mxl::validate(config);
  const auto format = mxl::parse_format(args.format);

  mxl::SimulationOptions opt;
  opt.audit = !args.no_audit;
  opt.keep_history = opt.audit || (!args.no_snapshots && !args.out.empty());
  const auto res = mxl::run_simulation(config, opt);

  if (args.out.empty()) {
    std::cout << mxl::format_metrics(res.metrics, format);
  } else {
    mxl::emit_metrics(res.metrics, args.out, format);
    if (!args.no_snapshots) mxl::write_text(mxl::snapshots_path(args.out), mxl::format_snapshots(res));
  }
  print_summary(res);
  return kExitOk;
}

int cmd_audit(const AuditArgs& args) {
  const auto config = resolve_config(args.config, args.preset);
  const auto metrics = mxl::read_metrics(args.metrics);
  const auto snaps = mxl::read_snapshots(args.snapshots.empty() ? mxl::snapshots_path(args.metrics) : args.snapshots);
  const auto rep = mxl::audit_metrics(metrics, snaps, config);
  for (const auto& m : rep.mismatches) std::cout << "mismatch: " << m << '\n';
  for (std::size_t u = 0; u < rep.final_avg_regret.size(); ++u)
    std::printf("user %zu: recomputed average regret %.6g, bound %.6g\n", u, rep.final_avg_regret[u],
                rep.final_bound[u]);
  std::printf("%d rows checked, %zu mismatches\n", rep.rows_checked, rep.mismatches.size());
  return rep.ok() ? kExitOk : kExitInvalid;
}

int cmd_selftest() {
  bool ok = true;
  for (const auto& c : mxl::selftest::run_all()) {
    std::printf("%s  %-64s worst %.3g (tol %.3g, %d samples)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.worst,
                c.tolerance, c.samples);
    ok = ok && c.passed;
  }
  return ok ? kExitOk : kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online matrix exponential learning for MIMO-OFDMA power control"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "simulate a scenario and write per-frame metrics");
  run_cmd->add_option("--config", run.config, "scenario document (JSON)");
  run_cmd->add_option("--preset", run.preset, "base preset: static, noisy-static or mobile");
  run_cmd->add_option("--seed", run.seed, "master seed (overrides MXLSIM_SEED and the document)");
  run_cmd->add_option("--frames", run.frames, "number of frames")->check(CLI::PositiveNumber);
  run_cmd->add_option("--feedback-delay", run.feedback_delay, "extra frames of gradient feedback lag")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--out", run.out, "metrics path (stdout when omitted)");
  run_cmd->add_option("--format", run.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  run_cmd->add_flag("--no-audit", run.no_audit, "skip the hindsight regret audit");
  run_cmd->add_flag("--no-snapshots", run.no_snapshots, "do not write the snapshot sidecar");

  AuditArgs audit;
  auto* audit_cmd = app.add_subcommand("audit", "recompute regret and bounds of a saved run");
  audit_cmd->add_option("--metrics", audit.metrics, "metrics file written by run")->required();
  audit_cmd->add_option("--config", audit.config, "scenario document used for the run");
  audit_cmd->add_option("--preset", audit.preset, "base preset used for the run");
  audit_cmd->add_option("--snapshots", audit.snapshots, "snapshot sidecar (default: <metrics>.snapshots.jsonl)");

  app.add_subcommand("selftest", "run the property suites of every module");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitInvalid;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run);
    if (audit_cmd->parsed()) return cmd_audit(audit);
    return cmd_selftest();
  } catch (const mxl::NumericOverflow& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const mxl::NotPositiveDefinite& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const mxl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}
