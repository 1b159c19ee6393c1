#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#ifndef MXLSIM_PATH
#error "MXLSIM_PATH must name the mxlsim executable"
#endif

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string output;
};

Outcome shell(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + MXLSIM_PATH + "' " + args + " 2>&1";
  Outcome out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) out.output += buf.data();
  const int raw = pclose(pipe);
  out.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) / ("mxlsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, RunWritesMetricsAndSnapshots) {
  const auto r = shell("run --preset static --seed 42 --frames 100 --out " + path("m.csv"));
  ASSERT_EQ(r.status, 0) << r.output;
  ASSERT_TRUE(fs::exists(path("m.csv")));
  ASSERT_TRUE(fs::exists(path("m.csv.snapshots.jsonl")));
  const auto text = slurp(path("m.csv"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 401);
  EXPECT_NE(r.output.find("avg regret"), std::string::npos) << r.output;
}

TEST_F(Cli, StdoutWhenNoOutputPath) {
  const auto r = shell("run --preset static --frames 3 --no-audit --format jsonl");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("{\"frame\":1,\"user\":0"), std::string::npos) << r.output;
}

TEST_F(Cli, ByteIdenticalReruns) {
  ASSERT_EQ(shell("run --preset mobile --frames 60 --seed 9 --out " + path("a.csv")).status, 0);
  ASSERT_EQ(shell("run --preset mobile --frames 60 --seed 9 --out " + path("b.csv")).status, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.csv.snapshots.jsonl")), slurp(path("b.csv.snapshots.jsonl")));
}

TEST_F(Cli, SeedPrecedence) {
  ASSERT_EQ(shell("run --preset static --frames 5 --no-audit --seed 6 --out " + path("flag.csv")).status, 0);
  ASSERT_EQ(shell("run --preset static --frames 5 --no-audit --seed 6 --out " + path("both.csv"), "MXLSIM_SEED=5").status, 0);
  ASSERT_EQ(shell("run --preset static --frames 5 --no-audit --out " + path("env.csv"), "MXLSIM_SEED=5").status, 0);
  ASSERT_EQ(shell("run --preset static --frames 5 --no-audit --seed 5 --out " + path("five.csv")).status, 0);
  EXPECT_EQ(slurp(path("flag.csv")), slurp(path("both.csv")));
  EXPECT_EQ(slurp(path("env.csv")), slurp(path("five.csv")));
  EXPECT_NE(slurp(path("flag.csv")), slurp(path("five.csv")));
}

TEST_F(Cli, ConfigDocument) {
  std::ofstream(path("c.json")) << R"({"preset": "static", "n_frames": 4, "master_seed": 3})";
  ASSERT_EQ(shell("run --config " + path("c.json") + " --no-audit --out " + path("c.csv")).status, 0);
  ASSERT_EQ(shell("run --preset static --frames 4 --seed 3 --no-audit --out " + path("p.csv")).status, 0);
  EXPECT_EQ(slurp(path("c.csv")), slurp(path("p.csv")));
}

TEST_F(Cli, AuditCleanAndTampered) {
  ASSERT_EQ(shell("run --preset static --frames 30 --out " + path("m.csv")).status, 0);
  const auto clean = shell("audit --metrics " + path("m.csv") + " --preset static");
  EXPECT_EQ(clean.status, 0) << clean.output;
  EXPECT_NE(clean.output.find("0 mismatches"), std::string::npos) << clean.output;

  // edit one cum_regret cell
  std::string text = slurp(path("m.csv"));
  std::size_t line_start = 0;
  for (int i = 0; i < 50; ++i) line_start = text.find('\n', line_start) + 1;
  std::size_t cell = line_start;
  for (int c = 0; c < 6; ++c) cell = text.find(',', cell) + 1;
  const std::size_t end = text.find(',', cell);
  text.replace(cell, end - cell, "-123.5");
  std::ofstream(path("m.csv"), std::ios::binary | std::ios::trunc) << text;

  const auto bad = shell("audit --metrics " + path("m.csv") + " --preset static");
  EXPECT_EQ(bad.status, 1) << bad.output;
  EXPECT_NE(bad.output.find("mismatch: frame"), std::string::npos) << bad.output;
  EXPECT_NE(bad.output.find("cum_regret"), std::string::npos) << bad.output;
}

TEST_F(Cli, AuditWithoutSnapshotsFails) {
  ASSERT_EQ(shell("run --preset static --frames 5 --no-snapshots --out " + path("m.csv")).status, 0);
  const auto r = shell("audit --metrics " + path("m.csv") + " --preset static");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("snapshots.jsonl"), std::string::npos) << r.output;
}

TEST_F(Cli, UsageErrors) {
  auto r = shell("run --preset static --bogus");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("Usage"), std::string::npos) << r.output;
  EXPECT_EQ(shell("").status, 1);
  EXPECT_EQ(shell("run").status, 1);
  EXPECT_EQ(shell("run --preset static --format xml").status, 1);
  EXPECT_EQ(shell("run --preset highway").status, 1);
  EXPECT_EQ(shell("--help").status, 0);
}

TEST_F(Cli, BadDocuments) {
  std::ofstream(path("bad.json")) << "{ \"n_frames\": 4,, }";
  auto r = shell("run --config " + path("bad.json"));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("line 1"), std::string::npos) << r.output;
  std::ofstream(path("invalid.json")) << R"({"n_frames": 0, "users": [{"speed_kmh": -2}]})";
  r = shell("run --config " + path("invalid.json"));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("n_frames"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("users[0].speed_kmh"), std::string::npos) << r.output;
  EXPECT_EQ(shell("run --preset static --out /nonexistent/dir/m.csv --frames 2 --no-audit").status, 1);
  EXPECT_EQ(shell("run --preset static --frames 2", "MXLSIM_SEED=abc").status, 1);
}

TEST_F(Cli, NumericFailureExitCode) {
  std::ofstream(path("huge.json")) << R"({"preset": "static", "n_frames": 3, "users": [{"pmax_dbm": 3000}]})";
  const auto r = shell("run --config " + path("huge.json") + " --no-audit");
  EXPECT_EQ(r.status, 2) << r.output;
  EXPECT_NE(r.output.find("numeric failure: frame 1"), std::string::npos) << r.output;
}

TEST_F(Cli, ShippedConfigsRun) {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(MXLSIM_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    const auto r = shell("run --config '" + entry.path().string() + "' --frames 5 --no-audit --out " + path("c.csv"));
    EXPECT_EQ(r.status, 0) << entry.path() << "\n" << r.output;
  }
  EXPECT_GE(seen, 3);
}

TEST_F(Cli, Selftest) {
  const auto r = shell("selftest");
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(r.output.find("FAIL"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("PASS"), std::string::npos);
}
