#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = JPAC_CLI_PATH;
const std::string kFixture = std::string(JPAC_DATA_DIR) + "/two_link_example.json";

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = (env.empty() ? "" : env + " ") + kCli + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.out += buf.data();
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("jpac_cli_test_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenWritesRequestedSizes) {
  const auto r = run("gen --links 4 --spread 0.1 --samples 200 --seed 7 --out " + path("a.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("a.json")));
  EXPECT_EQ(j["k"], 4);
  EXPECT_EQ(j["n"], 200);
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["samples"]["gains"].size(), 200u);
}

TEST_F(Cli, GenRejectsSpreadOfOne) {
  const auto r = run("gen --spread 1.0 --out " + path("x.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("S < 1"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(path("x.json")));
}

TEST_F(Cli, GenAutoSamples) {
  const auto r = run("gen --links 10 --epsilon 0.1 --delta 0.05 --auto-samples --out " + path("b.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(nlohmann::json::parse(slurp(path("b.json")))["n"], 200);
}

TEST_F(Cli, GenIsDeterministicAndHonoursSeedVariable) {
  ASSERT_EQ(run("gen --links 3 --samples 5 --spread 0.2 --seed 3 --out " + path("a.json")).code, 0);
  ASSERT_EQ(run("gen --links 3 --samples 5 --spread 0.2 --seed 3 --out " + path("b.json")).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  ASSERT_EQ(run("gen --links 3 --samples 5 --spread 0.2 --seed 3 --out " + path("c.json"), "JPAC_SEED=11").code, 0);
  const auto c = nlohmann::json::parse(slurp(path("c.json")));
  EXPECT_EQ(c["seed"], 11);
  EXPECT_NE(slurp(path("a.json")), slurp(path("c.json")));
  EXPECT_EQ(run("gen --out " + path("d.json"), "JPAC_SEED=abc").code, 2);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("gen --links four --out " + path("x.json")).code, 2);
  EXPECT_EQ(run("gen --links 3").code, 2);
  EXPECT_EQ(run("solve " + kFixture + " --algo cvx").code, 2);
  EXPECT_EQ(run("solve " + kFixture + " --removal random").code, 2);
  EXPECT_EQ(run("bench --runs 0").code, 2);
}

TEST_F(Cli, SolveTwoLinkFixture) {
  const auto r = run("solve " + kFixture + " --out " + path("r.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("supported: 1,2; q = 1.000,1.000"), std::string::npos) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_EQ(j["supported"], nlohmann::json::parse("[1,2]"));
  EXPECT_TRUE(j["removals"].empty());
}

TEST_F(Cli, SolveAlternatePaths) {
  const auto r = run("solve " + kFixture + " --algo subgrad --removal violation --out " + path("r.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_EQ(j["algo"], "subgrad");
  EXPECT_EQ(j["removal"], "violation");
  EXPECT_EQ(j["supported"].size(), 2u);
}

TEST_F(Cli, SolveWithOracleCheck) {
  ASSERT_EQ(run("gen --links 6 --spread 0.2 --samples 30 --seed 5 --out " + path("i.json")).code, 0);
  const auto r = run("solve " + path("i.json") + " --oracle-check --out " + path("r.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("oracle: m_star = "), std::string::npos) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_GE(j["oracle_gap"].get<int>(), 0);
  EXPECT_EQ(j["oracle"]["m_star"].get<std::size_t>(), j["supported"].size() + j["oracle_gap"].get<std::size_t>());
}

TEST_F(Cli, SolveBadInputExitsOne) {
  EXPECT_EQ(run("solve " + path("missing.json")).code, 1);
  std::ofstream(path("bad.json")) << "{\"k\": 2}";
  EXPECT_EQ(run("solve " + path("bad.json")).code, 1);
}

TEST_F(Cli, EnumerateFixture) {
  const auto r = run("enumerate " + kFixture + " --out " + path("o.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("m_star: 2"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("o.json")))["m_star"], 2);
}

TEST_F(Cli, BenchCellsAndDeterminism) {
  const std::string args = "bench --links 3,4 --spreads 0,0.1,0.2 --runs 4 --samples 20 --seed 1 --out-dir ";
  const auto a = run(args + path("a"));
  ASSERT_EQ(a.code, 0) << a.out;
  const auto b = run(args + path("b") + " --jobs 2");
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_EQ(slurp(path("a") + "/results.csv"), slurp(path("b") + "/results.csv"));
  const auto summary = nlohmann::json::parse(slurp(path("a") + "/summary.json"));
  EXPECT_EQ(summary["cells"].size(), 6u);
  EXPECT_NE(a.out.find("K=3 S=0 benchmark-nlpd: "), std::string::npos) << a.out;
  EXPECT_TRUE(fs::exists(path("a") + "/fig_supported_S0.1_pabb-d.dat"));
  EXPECT_TRUE(fs::exists(path("a") + "/fig_power_S0_benchmark-nlpd.dat"));
  EXPECT_TRUE(fs::exists(path("a") + "/fig_time_S0.2_pabb-d.dat"));
}

TEST_F(Cli, BenchUnwritableDirectoryExitsOne) {
  std::ofstream(path("file")) << "x";
  EXPECT_EQ(run("bench --links 2 --spreads 0 --runs 1 --samples 2 --out-dir " + path("file") + "/sub").code, 1);
}
