#include "fpaxos/cli.h"

#include <gtest/gtest.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace fpaxos::cli {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// Last line of stdout, parsed as JSON.
nlohmann::json last_json(const std::string& out) {
  auto end = out.find_last_not_of('\n');
  auto start = out.rfind('\n', end);
  return nlohmann::json::parse(out.substr(start == std::string::npos ? 0 : start + 1, end - start));
}

std::vector<std::map<std::string, std::string>> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::map<std::string, std::string> row;
    std::size_t i = 0;
    for (std::string cell; std::getline(ls, cell, ',');) row[header.at(i++)] = cell;
    rows.push_back(std::move(row));
  }
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("fpaxos_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, AnalyzeSimple) {
  const auto r = run({"quorum", "analyze", "--kind", "simple", "--n", "10", "--q2", "3"});
  EXPECT_EQ(r.code, kOk);
  const auto j = last_json(r.out);
  EXPECT_EQ(j.at("q1"), 8);
  EXPECT_EQ(j.at("q2"), 3);
  EXPECT_EQ(j.at("fault_tolerance").at("guaranteed_f"), 2);
  EXPECT_NE(r.out.find("guaranteed_f          2"), std::string::npos);
}

TEST_F(CliTest, AnalyzeGrid) {
  const auto r = run({"quorum", "analyze", "--kind", "grid", "--rows", "4", "--cols", "5", "--mode", "fpaxos"});
  EXPECT_EQ(r.code, kOk);
  const auto j = last_json(r.out);
  EXPECT_EQ(j.at("q1"), 5);
  EXPECT_EQ(j.at("q2"), 4);
  const auto paxos = last_json(run({"quorum", "analyze", "--kind", "grid", "--rows", "4", "--cols", "5", "--mode", "paxos"}).out);
  EXPECT_EQ(paxos.at("q1"), 8);
  EXPECT_EQ(paxos.at("fault_tolerance").at("min_blocking_f"), 4);
  EXPECT_EQ(paxos.at("fault_tolerance").at("best_case_f"), 12);
}

TEST_F(CliTest, AnalyzeRejectsBadParameters) {
  const auto r = run({"quorum", "analyze", "--kind", "simple", "--n", "3", "--q2", "4"});
  EXPECT_EQ(r.code, kUsage);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run({"quorum", "analyze", "--custom", "q1=[[0]]", "q2=[[1]]", "--n", "2"}).code, kViolation);
}

TEST_F(CliTest, CheckSafeSystems) {
  auto r = run({"check", "--n", "3", "--kind", "majority", "--ballots", "2", "--values", "2"});
  EXPECT_EQ(r.code, kOk);
  EXPECT_NE(r.out.find("states explored   3921"), std::string::npos);
  r = run({"check", "--n", "4", "--kind", "majority", "--improved", "--ballots", "2"});
  EXPECT_EQ(r.code, kOk);
}

TEST_F(CliTest, CheckDisjointWritesCounterexample) {
  const auto cx = path("cx.jsonl");
  const auto r = run({"check", "--custom", "q1=[[0]]", "q2=[[1]]", "--n", "2", "--counterexample", cx});
  EXPECT_EQ(r.code, kViolation);
  const auto text = slurp(cx);
  std::istringstream in(text);
  std::string line;
  std::size_t lines = 0;
  nlohmann::json last;
  while (std::getline(in, line)) {
    last = nlohmann::json::parse(line);
    ++lines;
  }
  EXPECT_EQ(lines, 9u);
  EXPECT_EQ(last.at("property"), "agreement");

  // Same flags, same bytes.
  const auto cx2 = path("cx2.jsonl");
  run({"check", "--custom", "q1=[[0]]", "q2=[[1]]", "--n", "2", "--counterexample", cx2});
  EXPECT_EQ(slurp(cx2), text);
}

TEST_F(CliTest, ScenariosMatchGoldens) {
  for (const std::string name : {"fig2a", "fig2b"}) {
    const auto trace = path(name + ".jsonl");
    const auto r = run({"simulate", "--scenario", name, "--trace", trace});
    EXPECT_EQ(r.code, kOk) << name;
    EXPECT_EQ(slurp(trace), slurp(fs::path(FPAXOS_GOLDEN_DIR) / (name + ".jsonl"))) << name;
  }
}

TEST_F(CliTest, ImprovedMajorityKeepsCommittingAfterCrashes) {
  const auto r = run({"simulate", "--n", "4", "--kind", "majority", "--improved", "--crash", "t=5000,r=2", "--crash",
                      "t=5000,r=3", "--duration-ms", "30000"});
  EXPECT_EQ(r.code, kOk);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_GT(j.at("after_last_event").at("decisions").get<std::size_t>(), 0u);
}

TEST_F(CliTest, SimulateIsDeterministic) {
  const std::vector<std::string> base{"simulate", "--n", "5", "--latency", "uniform", "--loss", "0.01", "--duration-ms", "20000",
                                      "--warmup-ms", "2000", "--cooldown-ms", "2000", "--seed", "11"};
  auto a = base;
  a.insert(a.end(), {"--trace", path("t1"), "--metrics", path("m1")});
  auto b = base;
  b.insert(b.end(), {"--trace", path("t2"), "--metrics", path("m2")});
  EXPECT_EQ(run(a).code, kOk);
  EXPECT_EQ(run(b).code, kOk);
  EXPECT_FALSE(slurp(path("t1")).empty());
  EXPECT_EQ(slurp(path("t1")), slurp(path("t2")));
  EXPECT_EQ(slurp(path("m1")), slurp(path("m2")));
}

TEST_F(CliTest, SweepAccountingAndTrend) {
  const auto out = path("sweep.csv");
  const auto r = run({"sweep", "--kind", "simple", "--ns", "8", "--q2s", "2", "3", "4", "5", "--seeds", "5", "--latency",
                      "heterogeneous", "--out", out, "--threads", "2"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto rows = parse_csv(slurp(out));
  ASSERT_EQ(rows.size(), 20u);
  std::map<std::string, double> prev_latency;
  for (const auto& row : rows) {
    const auto q2 = std::stoi(row.at("q2"));
    EXPECT_DOUBLE_EQ(std::stod(row.at("msgs_per_commit")), 2.0 * q2 + 2.0);
    const auto& seed = row.at("seed");
    const auto lat = std::stod(row.at("mean_lat"));
    if (prev_latency.count(seed)) EXPECT_GE(lat, prev_latency[seed]) << "seed " << seed << " q2 " << q2;
    prev_latency[seed] = lat;
  }
}

TEST_F(CliTest, SweepRejectsNonIntersectingVariation) {
  const auto r = run({"sweep", "--custom", "q1=[[0]]", "q2=[[1]]", "--n", "2", "--duration-ms", "1000", "--warmup-ms", "0",
                      "--cooldown-ms", "0"});
  EXPECT_EQ(r.code, kUsage);
  EXPECT_NE(r.err.find("do not intersect"), std::string::npos);
}

TEST_F(CliTest, SeedFromEnvironment) {
  ::setenv("FPAXOS_SEED", "7", 1);
  const auto r = run({"simulate", "--duration-ms", "2000", "--warmup-ms", "0", "--cooldown-ms", "0"});
  ::unsetenv("FPAXOS_SEED");
  ASSERT_EQ(r.code, kOk);
  EXPECT_EQ(nlohmann::json::parse(r.out).at("seed"), 7);
  const auto flag = run({"simulate", "--duration-ms", "2000", "--warmup-ms", "0", "--cooldown-ms", "0", "--seed", "3"});
  EXPECT_EQ(nlohmann::json::parse(flag.out).at("seed"), 3);
}

TEST_F(CliTest, JsonConfigMirrorsFlags) {
  const auto cfg = path("cfg.json");
  std::ofstream(cfg) << R"({"n": 4, "kind": "majority", "improved": true, "duration-ms": 3000,
                           "warmup-ms": 0, "cooldown-ms": 0, "crash": ["t=1000,r=3"]})";
  auto r = run({"simulate", "--config", cfg});
  ASSERT_EQ(r.code, kOk) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("n"), 4);
  EXPECT_EQ(j.at("q2"), 2);
  EXPECT_EQ(j.at("after_last_event").at("t_ms"), 1000.0);
  // Command-line flags win over the file.
  r = run({"simulate", "--config", cfg, "--n", "6"});
  EXPECT_EQ(nlohmann::json::parse(r.out).at("n"), 6);

  const auto check_cfg = path("check.json");
  std::ofstream(check_cfg) << R"({"custom": ["q1=[[0]]", "q2=[[1]]"], "n": 2, "counterexample": ")" + path("c.jsonl") + "\"}";
  EXPECT_EQ(run({"check", "--config", check_cfg}).code, kViolation);
  EXPECT_TRUE(fs::exists(path("c.jsonl")));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, kUsage);
  EXPECT_EQ(run({"bogus"}).code, kUsage);
  EXPECT_EQ(run({"check", "--ballots", "x"}).code, kUsage);
  EXPECT_EQ(run({"check", "--ballots", "0"}).code, kUsage);
  EXPECT_EQ(run({"simulate", "--scenario", "fig9"}).code, kUsage);
  EXPECT_EQ(run({"simulate", "--crash", "r=2"}).code, kUsage);
  EXPECT_EQ(run({"simulate", "--config", path("missing.json")}).code, kUsage);
  EXPECT_EQ(run({"--help"}).code, kOk);
}

}  // namespace
}  // namespace fpaxos::cli
