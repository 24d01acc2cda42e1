#include "perfhom/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "perfhom/plan.hpp"

namespace perfhom {

namespace {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string sanitize_status(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

double effective_partition_exponent(const ExperimentPlan& plan) {
  return plan.partition_exponent > 0.0 ? plan.partition_exponent
                                       : 1.0 / (plan.dim - 2);
}

RowResult compute_row(const ExperimentPlan& plan, double epsilon, std::uint64_t seed,
                      double c0) {
  RowResult row;
  row.epsilon = epsilon;
  row.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Box window = plan.domain.scaled(1.0 / epsilon);
    const PointConfiguration config = sample(plan.process, plan.radii, window, seed);
    const HoleSet holes = build_holes(config, epsilon, plan.domain);
    row.n_holes = holes.size();

    HolePartition part;
    if (holes.size() > 0) {
      part = partition_general(holes, effective_partition_exponent(plan));
      row.n_good = part.good.size();
      row.n_bad = part.bad.size();
      row.eps_d_Ib = std::pow(epsilon, plan.dim) * static_cast<double>(part.bad.size());
      row.cap_bad_upper = part.cap_bad_upper;
      row.strange_density = empirical_strange_density(part, holes);
    }

    const double h = epsilon / plan.cells_per_eps;
    const GridSpec grid = make_grid(plan.domain, h);
    const GridField f =
        plan.source == SourceKind::One ? source_constant(grid) : source_bump(grid);
    auto [u_eps, rep_eps] = solve_perforated(holes, f, h, plan.mode);
    auto [u_hom, rep_hom] = solve_homogenized(c0, f, h);
    const NormReport nr = norms(u_eps, u_hom);
    row.l2_err = nr.l2_error;
    row.weak_indicator = weak_pairing_indicator(u_eps, u_hom);
    row.iters = rep_eps.iterations + rep_hom.iterations;
    row.residual = std::max(rep_eps.final_relative_residual, rep_hom.final_relative_residual);
  } catch (const std::exception& e) {
    row.status = sanitize_status(e.what());
  }
  const auto t1 = std::chrono::steady_clock::now();
  row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return row;
}

}  // namespace

void ExperimentPlan::validate() const {
  if (version != 1) throw std::invalid_argument("version: unsupported plan version");
  if (dim < 3) throw std::invalid_argument("dim: must be >= 3");
  process.validate();
  radii.validate(dim);
  if (domain.dim() != dim) throw std::invalid_argument("domain: dimension mismatch");
  if (domain.degenerate()) throw std::invalid_argument("domain: degenerate box");
  if (epsilons.empty()) throw std::invalid_argument("epsilons: must be nonempty");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw std::invalid_argument("epsilons: must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
      throw std::invalid_argument("epsilons: must be strictly decreasing");
  }
  if (seeds.empty()) throw std::invalid_argument("seeds: must be nonempty");
  if (cells_per_eps < 4)
    throw std::invalid_argument("grid.cells_per_eps: must be >= 4 (h <= eps/4)");
  if (partition_exponent != 0.0 &&
      !(partition_exponent > 0.0 && partition_exponent < 2.0 / (dim - 2)))
    throw std::invalid_argument("partition_exponent: must lie in (0, 2/(d-2))");
}

std::string ExperimentPlan::content_key() const {
  ExperimentPlan canon = *this;
  canon.output_dir.clear();
  canon.workers = 0;
  return plan_to_json(canon);
}

RowResult run_row(const ExperimentPlan& plan, double epsilon, std::uint64_t seed) {
  plan.validate();
  const double c0 = strange_term(plan.process, plan.radii, plan.dim);
  return compute_row(plan, epsilon, seed, c0);
}

void ExperimentReport::recompute_aggregates() {
  aggregates.clear();
  struct Acc {
    std::size_t n = 0;
    double sum = 0.0, sum2 = 0.0;
  };
  std::map<double, std::map<std::string, Acc>> acc;
  for (const RowResult& row : rows) {
    if (row.status != "ok") continue;
    auto& slot = acc[row.epsilon];
    const std::pair<const char*, double> metrics[] = {
        {"n_holes", static_cast<double>(row.n_holes)},
        {"n_good", static_cast<double>(row.n_good)},
        {"n_bad", static_cast<double>(row.n_bad)},
        {"eps_d_Ib", row.eps_d_Ib},
        {"cap_bad_upper", row.cap_bad_upper},
        {"strange_density", row.strange_density},
        {"l2_err", row.l2_err},
        {"weak_indicator", row.weak_indicator},
    };
    for (const auto& [name, value] : metrics) {
      Acc& a = slot[name];
      ++a.n;
      a.sum += value;
      a.sum2 += value * value;
    }
  }
  for (const auto& [eps, slot] : acc)
    for (const auto& [name, a] : slot) {
      Aggregate agg;
      agg.n = a.n;
      agg.mean = a.sum / static_cast<double>(a.n);
      if (a.n > 1) {
        const double var =
            std::max(0.0, (a.sum2 - a.sum * a.sum / static_cast<double>(a.n)) /
                              static_cast<double>(a.n - 1));
        agg.stderr_ = std::sqrt(var / static_cast<double>(a.n));
      }
      aggregates[eps][name] = agg;
    }
}

ExperimentReport run_convergence(const ExperimentPlan& plan) {
  plan.validate();
  const double c0 = strange_term(plan.process, plan.radii, plan.dim);
  const std::string key_prefix = plan.content_key();

  fs::path row_dir;
  if (!plan.output_dir.empty()) {
    row_dir = fs::path(plan.output_dir) / "rows";
    fs::create_directories(row_dir);
  }

  struct Job {
    double epsilon;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double eps : plan.epsilons)
    for (std::uint64_t seed : plan.seeds) jobs.push_back({eps, seed});
  std::vector<RowResult> results(jobs.size());

  auto row_path = [&](const Job& job) {
    const std::string key =
        key_prefix + "|" + fmt_double(job.epsilon) + "|" + std::to_string(job.seed);
    char name[32];
    std::snprintf(name, sizeof(name), "%016llx.row",
                  static_cast<unsigned long long>(fnv1a64(key)));
    return row_dir / name;
  };

  auto work = [&](std::size_t i) {
    const Job& job = jobs[i];
    if (!row_dir.empty()) {
      const fs::path path = row_path(job);
      if (fs::exists(path)) {
        std::ifstream in(path);
        std::string line;
        if (std::getline(in, line) && !line.empty()) {
          try {
            results[i] = parse_csv_row(line);
            return;
          } catch (const std::exception&) {
            // fall through to recompute a corrupt row file
          }
        }
      }
      results[i] = compute_row(plan, job.epsilon, job.seed, c0);
      atomic_write(path.string(), csv_row(results[i]) + "\n");
    } else {
      results[i] = compute_row(plan, job.epsilon, job.seed, c0);
    }
  };

  unsigned n_workers = plan.workers > 0 ? static_cast<unsigned>(plan.workers)
                                        : std::thread::hardware_concurrency();
  if (n_workers == 0) n_workers = 1;
  n_workers = std::min<unsigned>(n_workers, static_cast<unsigned>(jobs.size()));

  auto guarded = [&](std::size_t i) {
    try {
      work(i);
    } catch (const std::exception& e) {
      results[i].epsilon = jobs[i].epsilon;
      results[i].seed = jobs[i].seed;
      results[i].status = sanitize_status(e.what());
    }
  };
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (unsigned t = 0; t < n_workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
          guarded(i);
      });
    for (auto& t : pool) t.join();
  }

  ExperimentReport report;
  report.rows = std::move(results);
  report.recompute_aggregates();
  return report;
}

std::string csv_header() {
  return "epsilon,seed,n_holes,n_good,n_bad,eps_d_Ib,cap_bad_upper,strange_density,"
         "l2_err,weak_indicator,iters,residual,wall_ms,status";
}

std::string csv_row(const RowResult& row) {
  std::ostringstream os;
  os << fmt_double(row.epsilon) << ',' << row.seed << ',' << row.n_holes << ','
     << row.n_good << ',' << row.n_bad << ',' << fmt_double(row.eps_d_Ib) << ','
     << fmt_double(row.cap_bad_upper) << ',' << fmt_double(row.strange_density) << ','
     << fmt_double(row.l2_err) << ',' << fmt_double(row.weak_indicator) << ','
     << row.iters << ',' << fmt_double(row.residual) << ',';
  char wall[32];
  std::snprintf(wall, sizeof(wall), "%.3f", row.wall_ms);
  os << wall << ',' << sanitize_status(row.status);
  return os.str();
}

RowResult parse_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',' && fields.size() < 13) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  if (fields.size() != 14) throw std::runtime_error("csv row: expected 14 fields");
  RowResult row;
  row.epsilon = std::stod(fields[0]);
  row.seed = std::stoull(fields[1]);
  row.n_holes = std::stoull(fields[2]);
  row.n_good = std::stoull(fields[3]);
  row.n_bad = std::stoull(fields[4]);
  row.eps_d_Ib = std::stod(fields[5]);
  row.cap_bad_upper = std::stod(fields[6]);
  row.strange_density = std::stod(fields[7]);
  row.l2_err = std::stod(fields[8]);
  row.weak_indicator = std::stod(fields[9]);
  row.iters = std::stoi(fields[10]);
  row.residual = std::stod(fields[11]);
  row.wall_ms = std::stod(fields[12]);
  row.status = fields[13];
  return row;
}

void write_report_csv(std::ostream& os, const ExperimentReport& report) {
  os << csv_header() << '\n';
  for (const RowResult& row : report.rows) os << csv_row(row) << '\n';
}

ExperimentReport read_report_csv(std::istream& is) {
  ExperimentReport report;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("report csv: empty");
  if (line != csv_header()) throw std::runtime_error("report csv: unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    report.rows.push_back(parse_csv_row(line));
  }
  report.recompute_aggregates();
  return report;
}

void write_aggregates_json(std::ostream& os, const ExperimentReport& report) {
  nlohmann::json doc;
  doc["aggregates"] = nlohmann::json::array();
  for (const auto& [eps, metrics] : report.aggregates) {
    nlohmann::json entry;
    entry["epsilon"] = eps;
    for (const auto& [name, agg] : metrics) {
      entry["metrics"][name] = {{"n", agg.n}, {"mean", agg.mean}, {"stderr", agg.stderr_}};
    }
    doc["aggregates"].push_back(entry);
  }
  os << doc.dump(2) << '\n';
}

SllnResult slln_test(const ProcessSpec& spec, const RadiiSpec& radii, MarkFunction mark,
                     int dim, const std::vector<double>& windows, int n_seeds,
                     std::uint64_t seed_base, double stderr_multiple) {
  if (windows.empty() || n_seeds < 1) throw std::invalid_argument("slln_test: empty setup");
  const double target = mean_count_per_unit_volume(spec, dim) *
                        (mark == MarkFunction::Count ? 1.0 : mark_moment(radii, dim - 2));

  SllnResult result;
  for (double side : windows) {
    const Box window = Box::cube(dim, 0.0, side);
    const double volume = window.volume();
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
      const PointConfiguration config =
          sample(spec, radii, window, seed_base + static_cast<std::uint64_t>(s));
      double value = 0.0;
      if (mark == MarkFunction::Count) {
        value = static_cast<double>(config.size());
      } else {
        for (double rho : config.radii) value += std::pow(rho, dim - 2);
      }
      value /= volume;
      sum += value;
      sum2 += value * value;
    }
    SllnRow row;
    row.window = side;
    row.target = target;
    row.mean = sum / n_seeds;
    if (n_seeds > 1) {
      const double var = std::max(0.0, (sum2 - sum * sum / n_seeds) / (n_seeds - 1));
      row.stderr_ = std::sqrt(var / n_seeds);
    }
    result.table.push_back(row);
  }

  const SllnRow& last = result.table.back();
  const bool close = std::abs(last.mean - target) <= stderr_multiple * last.stderr_ ||
                     (last.stderr_ == 0.0 && last.mean == target);
  int nonincreasing = 0, checked = 0;
  const std::size_t m = result.table.size();
  for (std::size_t i = m >= 4 ? m - 4 : 0; i + 1 < m; ++i) {
    ++checked;
    if (std::abs(result.table[i + 1].mean - target) <=
        std::abs(result.table[i].mean - target) + 1e-15)
      ++nonincreasing;
  }
  const bool trend = nonincreasing >= std::min(2, checked);
  result.pass = close && trend;
  std::ostringstream detail;
  detail << "final dev " << std::abs(last.mean - target) << " vs " << stderr_multiple
         << "*stderr " << stderr_multiple * last.stderr_ << "; nonincreasing " << nonincreasing
         << "/" << checked;
  result.detail = detail.str();
  return result;
}

ThinningResult thinning_limit_test(const ProcessSpec& spec, int dim,
                                   const std::vector<double>& deltas, int n_seeds,
                                   double window_side, std::uint64_t seed_base) {
  if (deltas.empty() || n_seeds < 1) throw std::invalid_argument("thinning_limit_test: empty setup");
  for (std::size_t i = 1; i < deltas.size(); ++i)
    if (!(deltas[i] < deltas[i - 1]))
      throw std::invalid_argument("thinning_limit_test: deltas must be decreasing");

  RadiiSpec marks;
  marks.kind = RadiiKind::Constant;
  marks.constant_value = 1.0;
  const Box window = Box::cube(dim, 0.0, window_side);
  const double volume = window.volume();

  ThinningResult result;
  result.table.resize(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) result.table[i].delta = deltas[i];
  result.monotone_per_realization = true;

  auto point_key = [dim](const PointConfiguration& c, std::size_t i) {
    std::vector<double> key(c.center(i).begin(), c.center(i).end());
    return key;
  };

  double full_sum = 0.0;
  for (int s = 0; s < n_seeds; ++s) {
    const PointConfiguration config =
        sample(spec, marks, window, seed_base + static_cast<std::uint64_t>(s));
    full_sum += static_cast<double>(config.size()) / volume;
    std::set<std::vector<double>> previous;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      const PointConfiguration thinned = thin(config, deltas[i]);
      result.table[i].mean_per_unit_volume +=
          static_cast<double>(thinned.size()) / volume / n_seeds;
      std::set<std::vector<double>> current;
      for (std::size_t j = 0; j < thinned.size(); ++j) current.insert(point_key(thinned, j));
      if (i > 0) {
        for (const auto& key : previous)
          if (!current.count(key)) result.monotone_per_realization = false;
      }
      previous = std::move(current);
    }
  }
  result.full_mean_per_unit_volume = full_sum / n_seeds;
  return result;
}

MixingResult mixing_decay_probe(const ProcessSpec& spec, int dim,
                                const std::vector<double>& lags, int n_seeds,
                                std::uint64_t seed_base, double sigma_multiple) {
  if (lags.empty() || n_seeds < 2) throw std::invalid_argument("mixing_decay_probe: empty setup");
  const double max_lag = *std::max_element(lags.begin(), lags.end());
  const double side = std::ceil(max_lag) + 4.0;
  const Box window = Box::cube(dim, 0.0, side);
  RadiiSpec marks;
  marks.kind = RadiiKind::Constant;
  marks.constant_value = 1.0;

  // Reference cube Q = [1,2)^d; shifted cube offset along the first axis.
  std::vector<std::vector<double>> base_counts(1 + lags.size(),
                                               std::vector<double>(n_seeds, 0.0));
  for (int s = 0; s < n_seeds; ++s) {
    const PointConfiguration config =
        sample(spec, marks, window, seed_base + static_cast<std::uint64_t>(s));
    for (std::size_t i = 0; i < config.size(); ++i) {
      const auto x = config.center(i);
      bool in_rest = true;
      for (int k = 1; k < dim; ++k)
        if (x[k] < 1.0 || x[k] >= 2.0) in_rest = false;
      if (!in_rest) continue;
      if (x[0] >= 1.0 && x[0] < 2.0) base_counts[0][s] += 1.0;
      for (std::size_t l = 0; l < lags.size(); ++l)
        if (x[0] >= 1.0 + lags[l] && x[0] < 2.0 + lags[l]) base_counts[1 + l][s] += 1.0;
    }
  }

  auto covariance = [&](const std::vector<int>& pick, std::size_t lag_index) {
    double sa = 0.0, sb = 0.0, sab = 0.0;
    for (int idx : pick) {
      const double a = base_counts[0][idx];
      const double b = base_counts[1 + lag_index][idx];
      sa += a;
      sb += b;
      sab += a * b;
    }
    const double n = static_cast<double>(pick.size());
    return sab / n - (sa / n) * (sb / n);
  };

  std::vector<int> all(n_seeds);
  for (int i = 0; i < n_seeds; ++i) all[i] = i;

  MixingResult result;
  Rng boot(0xb00157a9);
  const int n_boot = 500;
  for (std::size_t l = 0; l < lags.size(); ++l) {
    MixingRow row;
    row.lag = lags[l];
    row.covariance = covariance(all, l);
    double bs = 0.0, bs2 = 0.0;
    std::vector<int> pick(n_seeds);
    for (int b = 0; b < n_boot; ++b) {
      for (int i = 0; i < n_seeds; ++i)
        pick[i] = std::min<int>(static_cast<int>(boot.uniform() * n_seeds), n_seeds - 1);
      const double c = covariance(pick, l);
      bs += c;
      bs2 += c * c;
    }
    const double var = std::max(0.0, bs2 / n_boot - (bs / n_boot) * (bs / n_boot));
    row.bootstrap_stderr = std::sqrt(var);
    result.table.push_back(row);
  }
  const MixingRow& last = result.table.back();
  result.decay = std::abs(last.covariance) <= sigma_multiple * last.bootstrap_stderr;
  return result;
}

}  // namespace perfhom
