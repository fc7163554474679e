#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regdiv/analytics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = REGDIV_CLI;
const std::string kModels = REGDIV_MODELS;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("regdiv_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI; stdout and stderr go to files in the scratch directory.
  int run(const std::string& args) {
    const std::string cmd = "'" + kCli + "' " + args + " > '" + (dir_ / "stdout").string() + "' 2> '" +
                            (dir_ / "stderr").string() + "'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string slurp(const fs::path& p) const {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }
  json read_json(const std::string& name) const { return json::parse(slurp(dir_ / name)); }
  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return (dir_ / name).string();
  }

  fs::path dir_;
};

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_F(Cli, SolveTableModel) {
  ASSERT_EQ(run("solve --model " + kModels + "/base.json --out " + out("o")), 0) << slurp(dir_ / "stderr");
  const auto j = read_json("o/solution.json");
  EXPECT_EQ(j["case"], "AllPositive");
  EXPECT_NEAR(j["barriers"][0].get<double>(), 1.050, 2e-3);
  EXPECT_NEAR(j["barriers"][1].get<double>(), 1.070, 2e-3);
  EXPECT_TRUE(j.contains("report"));
  EXPECT_EQ(j["config"]["h"], 1e-3);
  const auto csv = read_csv(slurp(dir_ / "o/value.csv"));
  ASSERT_GT(csv.size(), 100u);
  EXPECT_EQ(csv[0], (std::vector<std::string>{"regime", "x", "value", "derivative"}));
  EXPECT_EQ(csv[1][2], "0");
}

TEST_F(Cli, SolveSingleRegimeGivesClassicalBarrier) {
  ASSERT_EQ(run("solve --model " + kModels + "/single.json --out " + out("o")), 0);
  const auto j = read_json("o/solution.json");
  EXPECT_NEAR(j["barriers"][0].get<double>(), regdiv::single_regime_barrier(0.06, 0.24, 0.04), 1e-5);
}

TEST_F(Cli, SolveMixedModelReportsFallback) {
  ASSERT_EQ(run("solve --model " + kModels + "/mixed.json --out " + out("o")), 0);
  const auto j = read_json("o/solution.json");
  EXPECT_EQ(j["case"], "MixedSign");
  EXPECT_EQ(j["method"], "barrier_pair");
  EXPECT_FALSE(j["notes"].empty());
}

TEST_F(Cli, InputErrorsExitOne) {
  EXPECT_EQ(run("solve --model " + write("bad.json", "{\"states\": [") + " --out " + out("o")), 1);
  EXPECT_NE(slurp(dir_ / "stderr").find("Parse"), std::string::npos);
  EXPECT_EQ(run("solve --model " +
                write("zero.json", R"({"states":[{"mu":0.1,"sigma":0,"discount":0.05}],"generator":[[0]]})") +
                " --out " + out("o")),
            1);
  EXPECT_NE(slurp(dir_ / "stderr").find("NonPositiveVolatility"), std::string::npos);
  EXPECT_EQ(run("solve --model " + kModels + "/base.json --bogus 1"), 1);
  EXPECT_EQ(run("solve --model " + kModels + "/base.json --h 0.5"), 1);
  EXPECT_EQ(run("solve --model /nonexistent.json"), 1);
  EXPECT_EQ(run("simulate --model " + kModels + "/base.json --paths 2e8 --policy " +
                write("p.json", R"({"barriers":[1,1]})")),
            1);
  EXPECT_EQ(run("simulate --model " + kModels + "/mixed.json --out " + out("o") + " --policy " +
                write("band.json", R"({"barriers":[1.4,1.4],"liquidation":[1.5,0]})")),
            1);
}

TEST_F(Cli, TablesRows) {
  ASSERT_EQ(run("tables --out " + out("t")), 0) << slurp(dir_ / "stderr");
  const auto csv = read_csv(slurp(dir_ / "t/tables.csv"));
  ASSERT_EQ(csv.size(), 17u);
  EXPECT_EQ(csv[0], (std::vector<std::string>{"varied_param", "value", "a0_star", "b0_star", "b1_star"}));
  auto row = [&](const std::string& p, const std::string& v) {
    for (const auto& r : csv)
      if (r[0] == p && r[1] == v) return r;
    ADD_FAILURE() << "missing row " << p << "=" << v;
    return std::vector<std::string>(5, "nan");
  };
  auto num = [](const std::string& s) { return std::stod(s); };
  auto r = row("mu0", "0.04");
  EXPECT_NEAR(num(r[2]), 0.818, 5e-3);
  EXPECT_NEAR(num(r[3]), 0.958, 5e-3);
  EXPECT_NEAR(num(r[4]), 0.974, 5e-3);
  r = row("q00", "-0.01");
  EXPECT_NEAR(num(r[3]), 1.014, 5e-3);
  EXPECT_NEAR(num(r[2]), 1.013, 5e-3);
  r = row("r0", "0.06");
  EXPECT_NEAR(num(r[2]), 0.753, 5e-3);
  EXPECT_NEAR(num(r[3]), 0.869, 5e-3);
  EXPECT_NEAR(num(r[4]), 0.923, 5e-3);
}

TEST_F(Cli, VerifyTableModelPasses) {
  ASSERT_EQ(run("verify --model " + kModels + "/base.json --paths 2e4 --out " + out("v")), 0)
      << slurp(dir_ / "stdout");
  const auto j = read_json("v/verify.json");
  std::vector<std::string> names;
  for (const auto& c : j["checks"]) {
    names.push_back(c["name"]);
    EXPECT_TRUE(c["passed"].get<bool>()) << c.dump();
  }
  for (const char* want : {"hjb_residual", "concavity", "smooth_fit", "closed_form_barriers"})
    EXPECT_NE(std::find(names.begin(), names.end(), want), names.end()) << want;
}

TEST_F(Cli, VerifyMixedModelFindsNonConcavity) {
  ASSERT_EQ(run("verify --model " + kModels + "/mixed.json --paths 2e4 --out " + out("v")), 0) << slurp(dir_ / "stderr");
  const auto j = read_json("v/verify.json");
  bool seen = false;
  for (const auto& c : j["checks"])
    if (c["name"] == "non_concavity") {
      seen = true;
      EXPECT_TRUE(c["passed"].get<bool>());
      EXPECT_GT(c["value"].get<double>(), 1e-4);
    }
  EXPECT_TRUE(seen);
}

TEST_F(Cli, VerifyPerturbedPolicyFails) {
  ASSERT_EQ(run("solve --model " + kModels + "/base.json --out " + out("o")), 0);
  const auto sol = read_json("o/solution.json");
  json p{{"barriers", {sol["barriers"][0].get<double>() + 0.3, sol["barriers"][1].get<double>() + 0.3}}};
  const auto path = write("perturbed.json", p.dump());
  EXPECT_EQ(run("verify --model " + kModels + "/base.json --policy " + path + " --paths 2e4 --out " + out("v")), 3);
  const auto j = read_json("v/verify.json");
  for (const auto& c : j["checks"])
    if (c["name"] == "hjb_residual") EXPECT_FALSE(c["passed"].get<bool>());
}

TEST_F(Cli, SimulateIsByteIdenticalAndEchoesConfig) {
  const auto pol = write("p.json", R"({"barriers":[1.05,1.07]})");
  const std::string args = "simulate --model " + kModels + "/base.json --policy " + pol +
                           " --paths 2e4 --dt 1e-4 --seed 42 --probe-points 0@0,0.5@1 --out ";
  ASSERT_EQ(run(args + out("a")), 0);
  ASSERT_EQ(run(args + out("b")), 0);
  EXPECT_EQ(slurp(dir_ / "a/estimate.json"), slurp(dir_ / "b/estimate.json"));
  const auto j = read_json("a/estimate.json");
  EXPECT_EQ(j["config"]["seed"], 42);
  EXPECT_EQ(j["config"]["paths"], 20000);
  EXPECT_EQ(j["estimates"][0]["mean"], 0.0);
  EXPECT_GT(j["estimates"][1]["mean"].get<double>(), 0.5);
}

TEST_F(Cli, SimulateSingleRegimeMatchesClosedForm) {
  const double a = regdiv::single_regime_barrier(0.06, 0.24, 0.04);
  json p{{"barriers", {a}}};
  const auto pol = write("p.json", p.dump());
  ASSERT_EQ(run("simulate --model " + kModels + "/single.json --policy " + pol +
                " --paths 1e5 --probe-points 0.5 --out " + out("s")),
            0);
  const auto e = read_json("s/estimate.json")["estimates"][0];
  const double v = regdiv::single_regime_value(0.06, 0.24, 0.04, 0.5);
  EXPECT_LE(std::abs(e["mean"].get<double>() - v), 3 * e["stderr"].get<double>());
}

TEST_F(Cli, SimulateDumpsPaths) {
  const auto pol = write("p.json", R"({"barriers":[1.05,1.07]})");
  ASSERT_EQ(run("simulate --model " + kModels + "/base.json --policy " + pol + " --paths 100 --dump-paths 2 --out " +
                out("d")),
            0);
  const auto csv = read_csv(slurp(dir_ / "d/paths.csv"));
  ASSERT_GT(csv.size(), 2u);
  EXPECT_EQ(csv[0], (std::vector<std::string>{"path", "t", "regime", "reserve", "cum_dividend", "discount"}));
}
