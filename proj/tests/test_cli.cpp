// Runs the installed-style command-line binary as a subprocess.

#include <json.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qtube_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(QTUBE_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string write_config(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("qtube_cli_" + name + ".cfg");
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST(Cli, OutputsAreBitIdenticalAcrossRuns) {
  for (const char* preset : {"straight-tube", "square-well-resonant", "gamma-small"}) {
    const auto a = scratch(std::string("det_a_") + preset), b = scratch(std::string("det_b_") + preset);
    ASSERT_EQ(run(std::string("run --preset ") + preset + " --seed 5 --out " + a.string()), 0);
    ASSERT_EQ(run(std::string("run --preset ") + preset + " --seed 5 --out " + b.string()), 0);
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
    }
    EXPECT_GE(files, 2);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST(Cli, StraightTubeHasNoDiscrepancy) {
  const auto out = scratch("straight");
  ASSERT_EQ(run("tube --preset straight-tube --out " + out.string()), 0);
  std::ifstream in(out / "confinement.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "eps,j,eig_tube,mu_eff,diff,overlap");
  int rows = 0;
  while (std::getline(in, line)) {
    double v[6];
    char c;
    std::istringstream ss(line);
    ss >> v[0] >> c >> v[1] >> c >> v[2] >> c >> v[3] >> c >> v[4] >> c >> v[5];
    EXPECT_LE(std::abs(v[4]), 1e-8) << line;
    ++rows;
  }
  EXPECT_GT(rows, 0);
  const auto m = nlohmann::json::parse(slurp(out / "run_manifest.json"));
  EXPECT_EQ(m["command"], "tube");
  fs::remove_all(out);
}

TEST(Cli, ResonantSquareWell) {
  const auto out = scratch("well");
  ASSERT_EQ(run("broken-line --preset square-well-resonant --out " + out.string()), 0);
  const auto j = nlohmann::json::parse(slurp(out / "classification.json"));
  EXPECT_TRUE(j["resonant"].get<bool>());
  EXPECT_LE(std::abs(j["c2"].get<double>()), 1e-10);
  fs::remove_all(out);
}

TEST(Cli, MalformedConfigExitsOneWithoutOutput) {
  const auto out = scratch("bad");
  const auto cfg = write_config("bad", "[study]\ncommand = tube\ngarbage line\n");
  EXPECT_EQ(run("run --config " + cfg + " --out " + out.string()), 1);
  EXPECT_FALSE(fs::exists(out));
  const auto unknown = write_config("unknown", "[tube]\nwidth = 3\n");
  EXPECT_EQ(run("tube --config " + unknown + " --out " + out.string()), 1);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(run("tube --config " + cfg + " --preset acc-1 --out " + out.string()), 1);
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, NumericalFailureExitsTwo) {
  const auto out = scratch("coarse");
  const auto cfg = write_config(
      "coarse", "[study]\ncommand = effective\n[curve]\npreset = straight\nlength = 5\nintervals = 20\n"
                "[effective]\nj_max = 12\n");
  EXPECT_EQ(run("effective --config " + cfg + " --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, GammaFlagsOverrideConfig) {
  const auto out = scratch("gamma");
  ASSERT_EQ(run("gamma-lab --preset gamma-small --family oscillation --dim 6 --eps-list 0.1,0.01,0.001,0.0001 --out " +
                out.string()),
            0);
  const auto j = nlohmann::json::parse(slurp(out / "gamma.json"));
  for (const auto& inst : j["instances"]) {
    EXPECT_EQ(inst["family"], "oscillation");
    EXPECT_EQ(inst["dim"], 6);
  }
  fs::remove_all(out);
}
