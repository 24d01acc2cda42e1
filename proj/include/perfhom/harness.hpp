// Monte Carlo experiment orchestration: the convergence sweep over
// (epsilon, seed) pairs and the statistical suite for the limit theorems
// (volume-normalised sums, thinning limits, covariance decay).
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "perfhom/capacity.hpp"
#include "perfhom/pde.hpp"
#include "perfhom/pointproc.hpp"

namespace perfhom {

enum class SourceKind { One, Bump };

struct StatsConfig {
  std::vector<double> windows = {4, 8, 16, 32};  // cube side lengths
  std::vector<double> deltas = {0.5, 0.25, 0.125};
  std::vector<double> lags = {1, 2, 4};
  int seeds = 200;
  // Pre-registered thresholds.
  double slln_stderr_multiple = 4.0;
  double mixing_sigma_multiple = 3.0;
};

struct ExperimentPlan {
  int version = 1;
  int dim = 3;
  ProcessSpec process;
  RadiiSpec radii;
  Box domain = Box::cube(3, 0.0, 1.0);
  std::vector<double> epsilons = {0.25, 0.125, 0.0625};
  std::vector<std::uint64_t> seeds = {1};
  int cells_per_eps = 8;  // grid spacing rule h = eps / cells_per_eps
  SolveMode mode = SolveMode::CapacityPenalty;
  SourceKind source = SourceKind::One;
  double partition_exponent = 0.0;  // 0 = default 1/(d-2)
  std::string output_dir;
  int workers = 0;  // 0 = hardware concurrency
  StatsConfig stats;

  void validate() const;
  // Canonical serialisation of everything a row depends on (used for
  // content-addressed resume); excludes output_dir/workers.
  std::string content_key() const;
};

struct RowResult {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_holes = 0, n_good = 0, n_bad = 0;
  double eps_d_Ib = 0.0;
  double cap_bad_upper = 0.0;
  double strange_density = 0.0;
  double l2_err = 0.0;
  double weak_indicator = 0.0;
  int iters = 0;
  double residual = 0.0;
  double wall_ms = 0.0;
  std::string status = "ok";
};

struct Aggregate {
  std::size_t n = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct ExperimentReport {
  std::vector<RowResult> rows;  // sorted by (epsilon desc, seed)
  // per-epsilon aggregates of the numeric row metrics, keyed by metric name
  std::map<double, std::map<std::string, Aggregate>> aggregates;

  void recompute_aggregates();
};

// Full sweep; deterministic per (plan, seed); failed rows are recorded with
// their error in `status`, never aborting the sweep. When plan.output_dir
// is set, rows are content-addressed on disk and reused on resume.
ExperimentReport run_convergence(const ExperimentPlan& plan);

// One row, no caching.
RowResult run_row(const ExperimentPlan& plan, double epsilon, std::uint64_t seed);

std::string csv_header();
std::string csv_row(const RowResult& row);
RowResult parse_csv_row(const std::string& line);
void write_report_csv(std::ostream& os, const ExperimentReport& report);
ExperimentReport read_report_csv(std::istream& is);
void write_aggregates_json(std::ostream& os, const ExperimentReport& report);

enum class MarkFunction { Count, RhoPower };  // 1 or rho^{d-2}

struct SllnRow {
  double window = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double target = 0.0;
};

struct SllnResult {
  std::vector<SllnRow> table;
  bool pass = false;
  std::string detail;
};

// Volume-normalised mark sums over growing windows vs the analytic target
// <N(Q)><X>; PASS iff the final-window mean is within the pre-registered
// stderr multiple of the target and the absolute deviation is nonincreasing
// in at least 2 of the last 3 window doublings.
SllnResult slln_test(const ProcessSpec& spec, const RadiiSpec& radii, MarkFunction mark,
                     int dim, const std::vector<double>& windows, int n_seeds,
                     std::uint64_t seed_base = 1, double stderr_multiple = 4.0);

struct ThinningRow {
  double delta = 0.0;
  double mean_per_unit_volume = 0.0;
};

struct ThinningResult {
  std::vector<ThinningRow> table;  // ordered as the given deltas
  double full_mean_per_unit_volume = 0.0;
  bool monotone_per_realization = false;  // exact set inclusion per seed
};

ThinningResult thinning_limit_test(const ProcessSpec& spec, int dim,
                                   const std::vector<double>& deltas, int n_seeds,
                                   double window_side = 16.0, std::uint64_t seed_base = 1);

struct MixingRow {
  double lag = 0.0;
  double covariance = 0.0;
  double bootstrap_stderr = 0.0;
};

struct MixingResult {
  std::vector<MixingRow> table;
  bool decay = false;  // |cov| at the largest lag below the sigma multiple
};

MixingResult mixing_decay_probe(const ProcessSpec& spec, int dim,
                                const std::vector<double>& lags, int n_seeds,
                                std::uint64_t seed_base = 1, double sigma_multiple = 3.0);

}  // namespace perfhom
