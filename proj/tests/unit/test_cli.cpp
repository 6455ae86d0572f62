#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "anchorplace/report.hpp"
#include "support.hpp"

using namespace anchorplace;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string err;
};

CliResult cli(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = env + " " + ANCHORPLACE_CLI + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                          err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_file(err);
  return r;
}

const std::string kConfig = testing_support::data_path("paper_scenario.json");

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Cli, EvaluateJsonCsvAgree) {
  const auto dir = testing_support::scratch_dir("cli_eval");
  const std::string place = (dir / "circle.json").string();
  ASSERT_EQ(cli("place --config " + kConfig + " --method circle --r0 2 --out " + place, dir).code, 0);
  ASSERT_EQ(cli("evaluate --config " + kConfig + " --placement " + place + " --out " + (dir / "e.json").string(), dir).code, 0);
  ASSERT_EQ(cli("evaluate --config " + kConfig + " --placement " + place + " --format csv --out " +
                    (dir / "e.csv").string(), dir).code, 0);
  const auto j = nlohmann::json::parse(read_file(dir / "e.json"));
  const auto rows = csv_rows(read_file(dir / "e.csv"));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "pcrb");
  EXPECT_EQ(std::stod(rows[1][3]), j.at("pcrb").get<double>());
  EXPECT_EQ(j.at("manifest").at("command"), "evaluate");
  EXPECT_EQ(j.at("manifest").at("scenario_sha1"), git_blob_sha1(read_file(kConfig)));
}

TEST(Cli, MissingConfigExitsTwo) {
  const auto dir = testing_support::scratch_dir("cli_missing");
  const CliResult r = cli("evaluate --config /no/such/scenario.json --placement x.json --out o.json", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/no/such/scenario.json"), std::string::npos);
}

TEST(Cli, BadFlagsExitTwo) {
  const auto dir = testing_support::scratch_dir("cli_flags");
  EXPECT_EQ(cli("optimize --config " + kConfig + " --starts 0 --out " + dir.string(), dir).code, 2);
  EXPECT_EQ(cli("sweep --config " + kConfig + " --p-dbm-range 30:10:2 --out " + dir.string(), dir).code, 2);
  EXPECT_EQ(cli("evaluate --config " + kConfig + " --format xml --placement a --out b", dir).code, 2);
  EXPECT_EQ(cli("frobnicate", dir).code, 2);
  EXPECT_EQ(cli("place --config " + kConfig + " --out " + (dir / "p.json").string(), dir, "ANCHOR_PLACER_THREADS=0").code,
            2);
}

TEST(Cli, OptimizeDeterministicAndDescends) {
  const auto a = testing_support::scratch_dir("cli_opt_a"), b = testing_support::scratch_dir("cli_opt_b");
  const std::string args = "optimize --config " + kConfig + " --starts 1 --seed 3 --out ";
  ASSERT_EQ(cli(args + a.string(), a, "ANCHOR_PLACER_THREADS=1").code, 0);
  ASSERT_EQ(cli(args + b.string(), b, "ANCHOR_PLACER_THREADS=1").code, 0);
  for (const char* f : {"trace.csv", "placement.json", "trace.svg"}) EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  // the manifest lists the output directory, which differs between the two runs
  auto ja = nlohmann::json::parse(read_file(a / "trace.json")), jb = nlohmann::json::parse(read_file(b / "trace.json"));
  ja.erase("manifest");
  jb.erase("manifest");
  EXPECT_EQ(ja, jb);

  const auto rows = csv_rows(read_file(a / "trace.csv"));
  EXPECT_EQ(rows[0], (std::vector<std::string>{"iter", "objective", "true_pcrb", "kkt_residual", "newton_iters"}));
  ASSERT_GE(rows.size(), 3u);
  const auto placement = nlohmann::json::parse(read_file(a / "placement.json"));
  EXPECT_LE(placement.at("pcrb").get<double>(), std::stod(rows[1][2]));
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_LE(std::stod(rows[i][1]), std::stod(rows[i - 1][1]));
}

TEST(Cli, OptimizeWithoutConvergenceExitsOne) {
  const auto dir = testing_support::scratch_dir("cli_opt_fail");
  EXPECT_EQ(cli("optimize --config " + kConfig + " --starts 1 --max-iters 2 --out " + dir.string(), dir).code, 1);
  EXPECT_TRUE(fs::exists(dir / "trace.csv"));
}

TEST(Cli, SweepRowsAndMonotoneCurves) {
  const auto dir = testing_support::scratch_dir("cli_sweep");
  const CliResult r = cli("sweep --config " + kConfig + " --p-dbm-range 18:22:2 --starts 1 --out " + dir.string(), dir);
  EXPECT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(read_file(dir / "sweep.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"p_dbm", "pcrb_proposed", "pcrb_bench1", "pcrb_bench2"}));
  for (std::size_t i = 2; i < rows.size(); ++i)
    for (int c = 1; c <= 3; ++c) EXPECT_LT(std::stod(rows[i][c]), std::stod(rows[i - 1][c]));
  const auto gaps = nlohmann::json::parse(read_file(dir / "gaps.json"));
  EXPECT_EQ(gaps.at("target_bench2_db"), 3.35);
  EXPECT_EQ(gaps.at("target_bench1_db"), 6.72);
  EXPECT_TRUE(gaps.contains("open_assumptions"));
  EXPECT_TRUE(fs::exists(dir / "sweep.svg"));
}

TEST(Cli, SimulateSeedRepeatable) {
  const auto dir = testing_support::scratch_dir("cli_sim");
  const std::string place = (dir / "fw.json").string();
  ASSERT_EQ(cli("place --config " + kConfig + " --method fw --out " + place, dir).code, 0);
  const std::string args = "simulate --config " + kConfig + " --placement " + place +
                           " --trials 300 --fim-trials 2000 --seed 9 --strict --out ";
  ASSERT_EQ(cli(args + (dir / "a.json").string(), dir).code, 0);
  ASSERT_EQ(cli(args + (dir / "b.json").string(), dir).code, 0);
  auto a = nlohmann::json::parse(read_file(dir / "a.json")), b = nlohmann::json::parse(read_file(dir / "b.json"));
  a.erase("manifest");
  b.erase("manifest");
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.at("mse").at("mse_ge_pcrb").get<bool>());
}
