// Command-line front end: sample | partition | solve | convergence | stats.
// Thin shell over the library; every output is written atomically.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "perfhom/harness.hpp"
#include "perfhom/plan.hpp"

namespace {

using namespace perfhom;
namespace fs = std::filesystem;

struct CommonOptions {
  std::string plan_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = -1;
  std::string mode;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--plan", opts.plan_path, "plan file (JSON)")->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "override the plan's seed list with one seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--workers", opts.workers, "worker count (default: available parallelism)");
  cmd->add_option("--mode", opts.mode, "resolved|penalty (override the plan)");
}

ExperimentPlan load_with_overrides(const CommonOptions& opts) {
  ExperimentPlan plan = load_plan(opts.plan_path);
  if (opts.seed_set) plan.seeds = {opts.seed};
  if (opts.workers >= 0) plan.workers = opts.workers;
  if (!opts.mode.empty()) {
    if (opts.mode == "resolved") plan.mode = SolveMode::Resolved;
    else if (opts.mode == "penalty") plan.mode = SolveMode::CapacityPenalty;
    else throw std::invalid_argument("mode: must be resolved|penalty");
  }
  plan.validate();
  return plan;
}

std::string out_path(const CommonOptions& opts, const std::string& name) {
  return (fs::path(opts.out_dir) / name).string();
}

int cmd_sample(const CommonOptions& opts) {
  const ExperimentPlan plan = load_with_overrides(opts);
  const double eps = plan.epsilons.front();
  const Box window = plan.domain.scaled(1.0 / eps);
  const PointConfiguration config =
      sample(plan.process, plan.radii, window, plan.seeds.front());
  std::ostringstream body;
  write_configuration(body, config);
  atomic_write(out_path(opts, "config.txt"), body.str());
  std::cout << "sampled " << config.size() << " points into "
            << out_path(opts, "config.txt") << "\n";
  return 0;
}

int cmd_partition(const CommonOptions& opts, const std::string& config_path, double epsilon) {
  const ExperimentPlan plan = load_with_overrides(opts);
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open configuration " + config_path);
  const PointConfiguration config = read_configuration(in);
  const double eps = epsilon > 0.0 ? epsilon : plan.epsilons.front();
  const HoleSet holes = build_holes(config, eps, plan.domain);
  const double exponent =
      plan.partition_exponent > 0.0 ? plan.partition_exponent : 1.0 / (plan.dim - 2);
  const HolePartition part = plan.process.kind == ProcessKind::Periodic
                                 ? partition_periodic(holes, exponent)
                                 : partition_general(holes, exponent);

  std::ostringstream dump;
  write_partition(dump, holes, part);
  atomic_write(out_path(opts, "partition.txt"), dump.str());

  std::ostringstream summary;
  summary << "holes " << holes.size() << "\ngood " << part.good.size() << "\nbad "
          << part.bad.size() << "\njb " << part.jb.size() << "\nkb " << part.kb.size()
          << "\nitilde " << part.itilde.size() << "\nr_eps " << part.r_eps
          << "\ncap_bad_upper " << part.cap_bad_upper << "\nstrange_density "
          << empirical_strange_density(part, holes) << "\n";
  atomic_write(out_path(opts, "partition_summary.txt"), summary.str());
  std::cout << summary.str();
  return 0;
}

int cmd_solve(const CommonOptions& opts) {
  const ExperimentPlan plan = load_with_overrides(opts);
  const double eps = plan.epsilons.front();
  const std::uint64_t seed = plan.seeds.front();
  const RowResult row = run_row(plan, eps, seed);
  if (row.status != "ok") throw std::runtime_error("row failed: " + row.status);

  // re-solve to capture the fields for output
  const Box window = plan.domain.scaled(1.0 / eps);
  const PointConfiguration config = sample(plan.process, plan.radii, window, seed);
  const HoleSet holes = build_holes(config, eps, plan.domain);
  const double h = eps / plan.cells_per_eps;
  const GridSpec grid = make_grid(plan.domain, h);
  const GridField f =
      plan.source == SourceKind::One ? source_constant(grid) : source_bump(grid);
  auto [u_eps, rep1] = solve_perforated(holes, f, h, plan.mode);
  auto [u_hom, rep2] = solve_homogenized(
      strange_term(plan.process, plan.radii, plan.dim), f, h);

  std::ostringstream ue, uh, rowtext;
  write_field(ue, u_eps);
  write_field(uh, u_hom);
  rowtext << csv_header() << '\n' << csv_row(row) << '\n';
  atomic_write(out_path(opts, "u_eps.field"), ue.str());
  atomic_write(out_path(opts, "u_hom.field"), uh.str());
  atomic_write(out_path(opts, "row.csv"), rowtext.str());
  std::cout << csv_header() << '\n' << csv_row(row) << '\n';
  return 0;
}

int cmd_convergence(const CommonOptions& opts) {
  ExperimentPlan plan = load_with_overrides(opts);
  if (plan.output_dir.empty()) plan.output_dir = opts.out_dir;
  const ExperimentReport report = run_convergence(plan);
  std::ostringstream csv, agg;
  write_report_csv(csv, report);
  write_aggregates_json(agg, report);
  atomic_write(out_path(opts, "report.csv"), csv.str());
  atomic_write(out_path(opts, "aggregate.json"), agg.str());
  std::size_t failed = 0;
  for (const auto& row : report.rows)
    if (row.status != "ok") ++failed;
  std::cout << report.rows.size() << " rows (" << failed << " failed) -> "
            << out_path(opts, "report.csv") << "\n";
  return 0;
}

int cmd_stats(const CommonOptions& opts) {
  const ExperimentPlan plan = load_with_overrides(opts);
  const StatsConfig& cfg = plan.stats;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);

  const SllnResult count_slln =
      slln_test(plan.process, plan.radii, MarkFunction::Count, plan.dim, cfg.windows,
                cfg.seeds, 1, cfg.slln_stderr_multiple);
  os << "slln mark=count verdict=" << (count_slln.pass ? "PASS" : "FAIL") << " ("
     << count_slln.detail << ")\n";
  for (const auto& row : count_slln.table)
    os << "  L=" << row.window << " mean=" << row.mean << " stderr=" << row.stderr_
       << " target=" << row.target << "\n";

  try {
    const SllnResult rho_slln =
        slln_test(plan.process, plan.radii, MarkFunction::RhoPower, plan.dim, cfg.windows,
                  cfg.seeds, 1, cfg.slln_stderr_multiple);
    os << "slln mark=rho^(d-2) verdict=" << (rho_slln.pass ? "PASS" : "FAIL") << " ("
       << rho_slln.detail << ")\n";
    for (const auto& row : rho_slln.table)
      os << "  L=" << row.window << " mean=" << row.mean << " stderr=" << row.stderr_
         << " target=" << row.target << "\n";
  } catch (const std::invalid_argument& e) {
    os << "slln mark=rho^(d-2) skipped: " << e.what() << "\n";
  }

  const ThinningResult thinning =
      thinning_limit_test(plan.process, plan.dim, cfg.deltas, cfg.seeds);
  os << "thinning monotone_per_realization="
     << (thinning.monotone_per_realization ? "PASS" : "FAIL")
     << " full_mean=" << thinning.full_mean_per_unit_volume << "\n";
  for (const auto& row : thinning.table)
    os << "  delta=" << row.delta << " mean=" << row.mean_per_unit_volume << "\n";

  const MixingResult mixing = mixing_decay_probe(plan.process, plan.dim, cfg.lags, cfg.seeds,
                                                 1, cfg.mixing_sigma_multiple);
  os << "mixing decay_at_max_lag=" << (mixing.decay ? "PASS" : "FAIL") << "\n";
  for (const auto& row : mixing.table)
    os << "  lag=" << row.lag << " cov=" << row.covariance
       << " bootstrap_stderr=" << row.bootstrap_stderr << "\n";

  atomic_write(out_path(opts, "stats.txt"), os.str());
  std::cout << os.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"perforated-domain homogenization toolkit"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string config_path;
  double epsilon = 0.0;

  CLI::App* sample_cmd = app.add_subcommand("sample", "write a point configuration");
  add_common(sample_cmd, opts);
  CLI::App* partition_cmd =
      app.add_subcommand("partition", "partition a stored configuration into good/bad holes");
  add_common(partition_cmd, opts);
  partition_cmd->add_option("--config", config_path, "configuration file")->required();
  partition_cmd->add_option("--epsilon", epsilon, "scale parameter (default: plan's first)");
  CLI::App* solve_cmd = app.add_subcommand("solve", "one (epsilon, seed) end-to-end row");
  add_common(solve_cmd, opts);
  CLI::App* convergence_cmd = app.add_subcommand("convergence", "full Monte Carlo sweep");
  add_common(convergence_cmd, opts);
  CLI::App* stats_cmd = app.add_subcommand("stats", "slln/thinning/mixing test suite");
  add_common(stats_cmd, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (sample_cmd->parsed()) return cmd_sample(opts);
    if (partition_cmd->parsed()) return cmd_partition(opts, config_path, epsilon);
    if (solve_cmd->parsed()) return cmd_solve(opts);
    if (convergence_cmd->parsed()) return cmd_convergence(opts);
    if (stats_cmd->parsed()) return cmd_stats(opts);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
