#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "perfhom/harness.hpp"
#include "perfhom/plan.hpp"

using namespace perfhom;

namespace {

constexpr double kPi = 3.14159265358979323846;

ExperimentPlan periodic_plan() {
  ExperimentPlan plan;
  plan.process.kind = ProcessKind::Periodic;
  plan.radii.kind = RadiiKind::Constant;
  plan.radii.constant_value = 0.5;
  plan.domain = Box::cube(3, 0.0, 1.0);
  plan.epsilons = {0.25, 0.125};
  plan.seeds = {1};
  plan.cells_per_eps = 4;
  plan.mode = SolveMode::CapacityPenalty;
  plan.workers = 1;
  return plan;
}

ExperimentPlan poisson_plan() {
  ExperimentPlan plan = periodic_plan();
  plan.process.kind = ProcessKind::Poisson;
  plan.process.intensity = 1.0;
  plan.radii.kind = RadiiKind::Pareto;
  plan.radii.pareto = {1.0, 1.5};
  plan.seeds = {1, 2, 3};
  return plan;
}

std::string csv_of(const ExperimentReport& report) {
  std::ostringstream os;
  write_report_csv(os, report);
  return os.str();
}

std::string strip_wall_ms(const std::string& csv) {
  std::istringstream is(csv);
  std::ostringstream os;
  std::string line;
  while (std::getline(is, line)) {
    // wall_ms is the 13th comma-separated field
    std::size_t start = 0;
    int commas = 0;
    for (std::size_t i = 0; i < line.size(); ++i)
      if (line[i] == ',' && ++commas == 12) {
        start = i + 1;
        break;
      }
    std::size_t end = line.find(',', start);
    os << line.substr(0, start) << "-" << line.substr(end) << "\n";
  }
  return os.str();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("single row on the periodic baseline") {
  ExperimentPlan plan = periodic_plan();
  const RowResult row = run_row(plan, 0.25, 1);
  CHECK(row.status == "ok");
  CHECK(row.n_holes == 64);
  CHECK(row.n_good == 64);
  CHECK(row.n_bad == 0);
  CHECK(row.l2_err > 0.0);
  // exact finite-eps density: 4*pi*r / (1 - 2 eps^2 r), within 10% of 2*pi
  CHECK(row.strange_density ==
        doctest::Approx(4.0 * kPi * 0.5 / (1.0 - 2.0 * 0.25 * 0.25 * 0.5)).epsilon(1e-12));
  CHECK(row.strange_density == doctest::Approx(2.0 * kPi).epsilon(0.10));
  CHECK(strange_term(plan.process, plan.radii, 3) ==
        doctest::Approx(2.0 * kPi).epsilon(1e-13));

  const RowResult again = run_row(plan, 0.25, 1);
  CHECK(strip_wall_ms(csv_row(again) + "\n") == strip_wall_ms(csv_row(row) + "\n"));
}

TEST_CASE("row determinism is bit-exact apart from wall time") {
  ExperimentPlan plan = poisson_plan();
  const RowResult a = run_row(plan, 0.25, 7);
  const RowResult b = run_row(plan, 0.25, 7);
  CHECK(a.status == "ok");
  CHECK(strip_wall_ms(csv_row(a) + "\n") == strip_wall_ms(csv_row(b) + "\n"));
}

TEST_CASE("degenerate zero-radius plan reproduces the clean solution gap") {
  ExperimentPlan plan = periodic_plan();
  plan.radii.constant_value = 0.0;
  const RowResult row = run_row(plan, 0.25, 1);
  CHECK(row.status == "ok");
  CHECK(row.strange_density == 0.0);
  // u_eps is the clean solution, so the error equals the C0=0 vs C0 gap;
  // with r = 0 the strange term vanishes and the gap must be zero
  CHECK(row.l2_err == 0.0);
}

TEST_CASE("convergence sweep: aggregates, csv round trip, reproducibility") {
  ExperimentPlan plan = poisson_plan();
  const ExperimentReport report = run_convergence(plan);
  REQUIRE(report.rows.size() == 6);
  for (const auto& row : report.rows) CHECK(row.status == "ok");

  // aggregates recomputable from rows
  const std::string csv = csv_of(report);
  std::istringstream back(csv);
  ExperimentReport reloaded = read_report_csv(back);
  REQUIRE(reloaded.rows.size() == report.rows.size());
  for (const auto& [eps, metrics] : report.aggregates)
    for (const auto& [name, agg] : metrics) {
      const auto& other = reloaded.aggregates.at(eps).at(name);
      CHECK(other.n == agg.n);
      CHECK(other.mean == doctest::Approx(agg.mean).epsilon(1e-12));
      CHECK(other.stderr_ == doctest::Approx(agg.stderr_).epsilon(1e-12));
    }

  // two fresh runs are byte-identical up to wall_ms
  const ExperimentReport second = run_convergence(plan);
  CHECK(strip_wall_ms(csv_of(second)) == strip_wall_ms(csv));

  std::ostringstream agg_json;
  write_aggregates_json(agg_json, report);
  CHECK(agg_json.str().find("l2_err") != std::string::npos);
}

TEST_CASE("row cache: resume recomputes exactly the missing rows") {
  TempDir dir("perfhom_resume_test");
  ExperimentPlan plan = poisson_plan();
  plan.output_dir = dir.path.string();
  const ExperimentReport first = run_convergence(plan);
  const std::string csv_first = csv_of(first);

  // delete a subset of the cached rows and resume
  std::vector<std::filesystem::path> row_files;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path / "rows"))
    row_files.push_back(entry.path());
  REQUIRE(row_files.size() == 6);
  std::sort(row_files.begin(), row_files.end());
  std::filesystem::remove(row_files[1]);
  std::filesystem::remove(row_files[4]);

  const ExperimentReport resumed = run_convergence(plan);
  CHECK(strip_wall_ms(csv_of(resumed)) == strip_wall_ms(csv_first));

  // untouched rows are reused byte-exactly, wall time included
  std::map<std::pair<double, std::uint64_t>, std::string> first_rows, resumed_rows;
  for (const auto& row : first.rows) first_rows[{row.epsilon, row.seed}] = csv_row(row);
  for (const auto& row : resumed.rows) resumed_rows[{row.epsilon, row.seed}] = csv_row(row);
  std::size_t identical = 0;
  for (const auto& [key, line] : first_rows)
    if (resumed_rows.at(key) == line) ++identical;
  CHECK(identical >= 4);
}

TEST_CASE("failed rows are recorded and the sweep continues") {
  ExperimentPlan plan = poisson_plan();
  plan.process.intensity = 2.0;
  plan.radii.kind = RadiiKind::CorrelatedPareto;
  plan.radii.correlation = {4.0, 1.0};
  plan.epsilons = {0.25, 1.0 / 16.0};  // the fine level exceeds the copula size limit
  plan.seeds = {1};
  const ExperimentReport report = run_convergence(plan);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].status == "ok");
  CHECK(report.rows[1].status != "ok");
  CHECK(report.rows[1].status.find("copula") != std::string::npos);
  CHECK(report.aggregates.count(0.25) == 1);
  CHECK(report.aggregates.count(1.0 / 16.0) == 0);  // no ok rows at the fine level
}

TEST_CASE("csv row format and parse round trip") {
  RowResult row;
  row.epsilon = 0.125;
  row.seed = 42;
  row.n_holes = 10;
  row.n_good = 9;
  row.n_bad = 1;
  row.eps_d_Ib = 0.001953125;
  row.cap_bad_upper = 1.25e-3;
  row.strange_density = 37.2;
  row.l2_err = 0.0123456789012345;
  row.weak_indicator = 1e-6;
  row.iters = 321;
  row.residual = 9.9e-9;
  row.wall_ms = 12.345;
  row.status = "ok";
  const RowResult back = parse_csv_row(csv_row(row));
  CHECK(back.epsilon == row.epsilon);
  CHECK(back.seed == row.seed);
  CHECK(back.l2_err == row.l2_err);
  CHECK(back.status == row.status);

  RowResult dirty = row;
  dirty.status = "bad, with commas\nand newline";
  const RowResult clean = parse_csv_row(csv_row(dirty));
  CHECK(clean.status == "bad; with commas;and newline");

  CHECK(csv_header() ==
        "epsilon,seed,n_holes,n_good,n_bad,eps_d_Ib,cap_bad_upper,strange_density,l2_err,"
        "weak_indicator,iters,residual,wall_ms,status");
}

TEST_CASE("slln: periodic counts are exact, poisson hits the stated targets") {
  ProcessSpec periodic;
  periodic.kind = ProcessKind::Periodic;
  RadiiSpec ones;
  ones.kind = RadiiKind::Constant;
  ones.constant_value = 1.0;
  const SllnResult lattice =
      slln_test(periodic, ones, MarkFunction::Count, 3, {4, 8, 16}, 5);
  CHECK(lattice.pass);
  for (const auto& row : lattice.table) {
    CHECK(row.mean == 1.0);
    CHECK(row.stderr_ == 0.0);
  }

  ProcessSpec poisson;
  poisson.kind = ProcessKind::Poisson;
  poisson.intensity = 2.0;
  const SllnResult counts =
      slln_test(poisson, ones, MarkFunction::Count, 3, {4, 8, 16, 32}, 30);
  CHECK(counts.pass);
  CHECK(counts.table.back().target == 2.0);

  poisson.intensity = 1.0;
  RadiiSpec marks;
  marks.kind = RadiiKind::Pareto;
  marks.pareto = {1.0, 1.5};
  const SllnResult moments =
      slln_test(poisson, marks, MarkFunction::RhoPower, 3, {4, 8, 16, 32}, 30);
  CHECK(moments.table.back().target == 3.0);
  CHECK(moments.pass);
}

TEST_CASE("thinning limits: lattice exactness and the poisson palm approximation") {
  ProcessSpec periodic;
  periodic.kind = ProcessKind::Periodic;
  const ThinningResult lattice = thinning_limit_test(periodic, 3, {0.9, 0.5}, 2, 8.0);
  CHECK(lattice.monotone_per_realization);
  for (const auto& row : lattice.table)
    CHECK(row.mean_per_unit_volume == lattice.full_mean_per_unit_volume);

  const ThinningResult wiped = thinning_limit_test(periodic, 3, {1.5}, 1, 8.0);
  CHECK(wiped.table[0].mean_per_unit_volume == 0.0);

  ProcessSpec poisson;
  poisson.kind = ProcessKind::Poisson;
  poisson.intensity = 1.0;
  const ThinningResult thinned =
      thinning_limit_test(poisson, 3, {0.5, 0.25, 0.125}, 40, 16.0);
  CHECK(thinned.monotone_per_realization);
  for (std::size_t i = 1; i < thinned.table.size(); ++i)
    CHECK(thinned.table[i].mean_per_unit_volume >= thinned.table[i - 1].mean_per_unit_volume);
  // Palm-formula oracle lambda*exp(-lambda (4pi/3) delta^3), boundary terms ignored
  for (const auto& row : thinned.table) {
    const double palm = std::exp(-(4.0 * kPi / 3.0) * std::pow(row.delta, 3));
    CHECK(std::abs(row.mean_per_unit_volume - palm) / palm < 0.05);
  }
  CHECK(thinned.table.back().mean_per_unit_volume <= thinned.full_mean_per_unit_volume);
}

TEST_CASE("mixing probe: poisson is flat, finite-range processes decay") {
  ProcessSpec poisson;
  poisson.kind = ProcessKind::Poisson;
  poisson.intensity = 1.0;
  const MixingResult independent = mixing_decay_probe(poisson, 3, {1, 2, 4}, 300);
  CHECK(independent.decay);
  for (const auto& row : independent.table)
    CHECK(std::abs(row.covariance) <= 3.0 * row.bootstrap_stderr);

  ProcessSpec ns;
  ns.kind = ProcessKind::NeymanScott;
  ns.intensity = 1.0;
  ns.ns_params = {1.0, 5.0};
  const MixingResult clustered = mixing_decay_probe(ns, 3, {1, 4}, 300);
  CHECK(clustered.decay);  // lag 4 > 2 + diam(Q): independent by finite range

  ProcessSpec strauss;
  strauss.kind = ProcessKind::Strauss;
  strauss.intensity = 1.0;
  strauss.strauss_params = {0.5, 0.3, 40};
  const MixingResult repulsive = mixing_decay_probe(strauss, 3, {2}, 120);
  CHECK(repulsive.decay);
}

TEST_CASE("plan validation rejects malformed setups") {
  ExperimentPlan plan = periodic_plan();
  plan.epsilons = {0.125, 0.25};
  CHECK_THROWS_WITH_AS(plan.validate(), doctest::Contains("epsilons"), std::invalid_argument);
  plan = periodic_plan();
  plan.cells_per_eps = 2;
  CHECK_THROWS_WITH_AS(plan.validate(), doctest::Contains("cells_per_eps"),
                       std::invalid_argument);
  plan = periodic_plan();
  plan.seeds.clear();
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
}
