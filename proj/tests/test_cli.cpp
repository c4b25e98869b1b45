#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace {

const std::string kCli = IMCVF_CLI_PATH;
const std::string kCharts = IMCVF_CHART_DIR;

struct Run {
  int rc = -1;
  std::string out;
};

Run run(const std::string& args) {
  Run r;
  std::string cmd = kCli + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  int st = pclose(p);
  r.rc = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string chart(const std::string& name) { return "--chart " + kCharts + "/" + name + ".json"; }

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("imcvf_cli_" + name)).string();
}

}  // namespace

TEST(Cli, ValidateMinkowski) {
  auto r = run("validate " + chart("minkowski") + " --json");
  ASSERT_EQ(r.rc, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["command"], "validate");
  EXPECT_TRUE(j["summary"]["pass"].get<bool>());
}

TEST(Cli, ValidateFailsWithoutD) {
  EXPECT_EQ(run("validate " + chart("seed")).rc, 2);
}

TEST(Cli, BuildThenValidate) {
  auto path = tmp("built.json");
  auto b = run("build " + chart("seed_offdiag") + " --solve-d --out " + path);
  ASSERT_EQ(b.rc, 0);
  auto v = run("validate --chart " + path + " --json");
  EXPECT_EQ(v.rc, 0);
  EXPECT_LE(nlohmann::json::parse(v.out)["summary"]["cond4_max"].get<double>(), 1e-8);
  std::filesystem::remove(path);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").rc, 1);
  EXPECT_EQ(run("nosuchcommand").rc, 1);
  EXPECT_EQ(run("validate --chart /nonexistent.json").rc, 1);
  EXPECT_EQ(run("hawking " + chart("minkowski") + " --grid 3x4").rc, 1);
  EXPECT_EQ(run("adm --factor '1 + 1/r' --radii 10,5").rc, 1);
  EXPECT_EQ(run("adm --factor '1 + (1/r'").rc, 1);
}

TEST(Cli, MalformedChartFile) {
  auto path = tmp("bad.json");
  std::ofstream(path) << "{\"v\": 1, \"a\": \"r^2\"";
  EXPECT_EQ(run("validate --chart " + path).rc, 1);
  std::ofstream(path) << R"({"v":1,"e":0,"f":0,"u":1,"a":"r^2","b":"r^2*sin(th)^2"})";
  EXPECT_EQ(run("validate --chart " + path).rc, 1);
  std::filesystem::remove(path);
}

TEST(Cli, HawkingSchwarzschild) {
  auto r = run("hawking " + chart("schwarzschild_areal") + " --radii 3,5 --grid 8x8 --json");
  ASSERT_EQ(r.rc, 0);
  auto rows = nlohmann::json::parse(r.out)["tables"]["hawking"]["rows"];
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& row : rows) EXPECT_NEAR(row[2].get<double>(), 1, 1e-9);
}

TEST(Cli, CsvHeaderAndRows) {
  auto r = run("hawking " + chart("minkowski") + " --radii 1,2 --grid 8x8");
  ASSERT_EQ(r.rc, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "r,area,m_H");
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
}

TEST(Cli, Deterministic) {
  for (std::string args : {"steer " + chart("seed_offdiag") + " --grid 8x8 --r 2.5",
                           "straightout " + chart("seed") + " --grid 16x32 --solve --json",
                           "curvature " + chart("positive_energy") + " --points '0,2,1,0;0.5,3,2,1'"}) {
    auto a = run(args), b = run(args);
    EXPECT_EQ(a.rc, b.rc) << args;
    EXPECT_FALSE(a.out.empty()) << args;
    EXPECT_EQ(a.out, b.out) << args;
  }
}

TEST(Cli, StraightOutSolveConverges) {
  auto r = run("straightout " + chart("seed") + " --grid 16x32 --solve --json");
  ASSERT_EQ(r.rc, 0);
  auto s = nlohmann::json::parse(r.out)["summary"];
  EXPECT_TRUE(s["solve"]["converged"].get<bool>());
  EXPECT_LE(s["route_max_diff"].get<double>(), 1e-6);
}

TEST(Cli, AdmAndFlowscan) {
  auto a = run("adm --factor '1 + 1/(2*r)' --json");
  ASSERT_EQ(a.rc, 0);
  EXPECT_NEAR(nlohmann::json::parse(a.out)["summary"]["adm_mass"].get<double>(), 1, 1e-3);
  EXPECT_EQ(run("adm --factor '2 + 1/r'").rc, 2);
  EXPECT_EQ(run("flowscan " + chart("positive_energy")).rc, 0);
  EXPECT_EQ(run("flowscan " + chart("seed_offdiag")).rc, 2);
}
