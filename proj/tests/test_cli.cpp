// Drives the installed CLI binary end to end through std::system.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "perfhom/harness.hpp"
#include "perfhom/plan.hpp"

#ifndef PERFHOM_CLI_PATH
#error "PERFHOM_CLI_PATH must be defined"
#endif

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args, const fs::path& capture) {
  const std::string cmd =
      std::string(PERFHOM_CLI_PATH) + " " + args + " >" + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

const char* kPeriodicPlan = R"({
  "version": 1,
  "process": {"kind": "periodic"},
  "radii": {"kind": "constant", "constant_value": 0.5},
  "domain": {"lo": [0, 0, 0], "hi": [1, 1, 1]},
  "epsilons": [0.25, 0.125],
  "seeds": [1],
  "grid": {"cells_per_eps": 4},
  "mode": "penalty"
})";

}  // namespace

TEST_CASE("sample writes the expected lattice configuration") {
  TempDir dir("perfhom_cli_sample");
  write(dir.path / "plan.json", kPeriodicPlan);
  const int code = run_cli("sample --plan " + (dir.path / "plan.json").string() + " --out " +
                               dir.path.string(),
                           dir.path / "log.txt");
  CHECK(code == 0);
  const std::string config = slurp(dir.path / "config.txt");
  std::size_t lines = 0;
  for (char c : config)
    if (c == '\n') ++lines;
  CHECK(lines == 65);  // header + 4^3 lattice points for eps = 1/4
}

TEST_CASE("malformed plan exits 1 and names the key path") {
  TempDir dir("perfhom_cli_badplan");
  write(dir.path / "plan.json", R"({
    "version": 1,
    "process": {"kind": "strauss", "intensity": 1.0,
                "strauss_params": {"inhibition": 1.5, "interaction_distance": 0.3, "mcmc_sweeps": 5}},
    "radii": {"kind": "constant", "constant_value": 1.0},
    "domain": {"lo": [0, 0, 0], "hi": [1, 1, 1]},
    "epsilons": [0.25],
    "seeds": [1]
  })");
  const int code = run_cli("sample --plan " + (dir.path / "plan.json").string() + " --out " +
                               dir.path.string(),
                           dir.path / "log.txt");
  CHECK(code == 1);
  CHECK(slurp(dir.path / "log.txt").find("strauss_params.inhibition") != std::string::npos);
}

TEST_CASE("runtime failures exit 2") {
  TempDir dir("perfhom_cli_runtime");
  write(dir.path / "plan.json", kPeriodicPlan);
  const int code = run_cli("partition --plan " + (dir.path / "plan.json").string() +
                               " --config " + (dir.path / "missing.txt").string() + " --out " +
                               dir.path.string(),
                           dir.path / "log.txt");
  CHECK(code == 2);
}

TEST_CASE("partition and solve emit their artifacts") {
  TempDir dir("perfhom_cli_solve");
  write(dir.path / "plan.json", kPeriodicPlan);
  const std::string plan_arg = " --plan " + (dir.path / "plan.json").string();
  const std::string out_arg = " --out " + dir.path.string();

  CHECK(run_cli("sample" + plan_arg + out_arg, dir.path / "log1.txt") == 0);
  CHECK(run_cli("partition" + plan_arg + out_arg + " --config " +
                    (dir.path / "config.txt").string(),
                dir.path / "log2.txt") == 0);
  const std::string summary = slurp(dir.path / "partition_summary.txt");
  CHECK(summary.find("holes 64") != std::string::npos);
  CHECK(summary.find("good 64") != std::string::npos);
  CHECK(slurp(dir.path / "partition.txt").find("GOOD(") != std::string::npos);

  CHECK(run_cli("solve" + plan_arg + out_arg, dir.path / "log3.txt") == 0);
  CHECK(fs::exists(dir.path / "u_eps.field"));
  CHECK(fs::exists(dir.path / "u_hom.field"));
  const std::string row = slurp(dir.path / "row.csv");
  CHECK(row.find(perfhom::csv_header()) != std::string::npos);
  CHECK(row.find(",ok") != std::string::npos);
}

TEST_CASE("convergence emits a decreasing-error report on the periodic baseline") {
  TempDir dir("perfhom_cli_convergence");
  write(dir.path / "plan.json", kPeriodicPlan);
  const int code = run_cli("convergence --plan " + (dir.path / "plan.json").string() +
                               " --out " + dir.path.string() + " --workers 2",
                           dir.path / "log.txt");
  CHECK(code == 0);
  REQUIRE(fs::exists(dir.path / "report.csv"));
  REQUIRE(fs::exists(dir.path / "aggregate.json"));

  std::ifstream csv(dir.path / "report.csv");
  const perfhom::ExperimentReport report = perfhom::read_report_csv(csv);
  REQUIRE(report.rows.size() == 2);
  const double coarse = report.aggregates.at(0.25).at("l2_err").mean;
  const double fine = report.aggregates.at(0.125).at("l2_err").mean;
  CHECK(fine < coarse);
}

TEST_CASE("stats command writes verdict tables") {
  TempDir dir("perfhom_cli_stats");
  write(dir.path / "plan.json", R"({
    "version": 1,
    "process": {"kind": "poisson", "intensity": 2.0},
    "radii": {"kind": "pareto", "pareto": {"scale": 1.0, "tail_exponent": 1.5}},
    "domain": {"lo": [0, 0, 0], "hi": [1, 1, 1]},
    "epsilons": [0.25],
    "seeds": [1],
    "stats": {"windows": [4, 8, 16], "deltas": [0.5, 0.25], "lags": [1, 2], "seeds": 40}
  })");
  const int code = run_cli("stats --plan " + (dir.path / "plan.json").string() + " --out " +
                               dir.path.string(),
                           dir.path / "log.txt");
  CHECK(code == 0);
  const std::string stats = slurp(dir.path / "stats.txt");
  CHECK(stats.find("slln mark=count") != std::string::npos);
  CHECK(stats.find("thinning") != std::string::npos);
  CHECK(stats.find("mixing") != std::string::npos);
}
