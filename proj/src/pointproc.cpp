#include "perfhom/pointproc.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "spatial_hash.hpp"

namespace perfhom {

namespace {

constexpr std::int64_t kTagPoints = 0x706f696e74;   // substream namespaces
constexpr std::int64_t kTagParents = 0x706172;
constexpr std::int64_t kTagStrauss = 0x737472;
constexpr std::int64_t kTagRadii = 0x726164;
constexpr std::int64_t kTagCopula = 0x636f70;

double unit_ball_volume(int dim) {
  return std::pow(3.14159265358979323846, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
}

struct RadiusDrawer {
  const RadiiSpec& spec;

  bool inline_iid() const { return spec.kind != RadiiKind::CorrelatedPareto; }

  double draw(Rng& rng) const {
    switch (spec.kind) {
      case RadiiKind::Constant:
        return spec.constant_value;
      case RadiiKind::Pareto: {
        double u;
        do { u = rng.uniform(); } while (u >= 1.0 - 1e-16);
        return spec.pareto.scale * std::pow(1.0 - u, -1.0 / spec.pareto.tail_exponent);
      }
      case RadiiKind::LogNormal:
        return std::exp(spec.lognormal.mu + spec.lognormal.sigma * rng.normal());
      case RadiiKind::CorrelatedPareto:
        return 0.0;  // filled by the copula pass
    }
    return 0.0;
  }
};

// Iterates the integer unit cubes intersecting `window`; each cube gets a
// substream keyed by its lattice coordinates, so realizations over nested
// integer-aligned windows share the draws of their common cubes.
template <class CubeFn>
void for_each_unit_cube(const Box& window, CubeFn&& fn) {
  const int d = window.dim();
  std::vector<std::int64_t> lo(d), hi(d), cur(d);
  for (int k = 0; k < d; ++k) {
    lo[k] = static_cast<std::int64_t>(std::floor(window.lo[k]));
    hi[k] = static_cast<std::int64_t>(std::ceil(window.hi[k]));
    if (hi[k] <= lo[k]) hi[k] = lo[k] + 1;
  }
  cur = lo;
  while (true) {
    fn(std::span<const std::int64_t>(cur.data(), cur.size()));
    int k = 0;
    for (; k < d; ++k) {
      if (++cur[k] < hi[k]) break;
      cur[k] = lo[k];
    }
    if (k == d) break;
  }
}

// Homogeneous Poisson on `sample_window`, cube-wise substreams; appends
// points (and radii when the mark law is iid) that land inside `keep`.
void poisson_points(double intensity, const Box& sample_window, const Box& keep,
                    const Rng& root, const RadiusDrawer& marks,
                    std::vector<double>& centers, std::vector<double>& radii) {
  const int d = sample_window.dim();
  std::vector<double> x(d), clip_lo(d), clip_hi(d);
  for_each_unit_cube(sample_window, [&](std::span<const std::int64_t> cube) {
    double vol = 1.0;
    for (int k = 0; k < d; ++k) {
      clip_lo[k] = std::max(static_cast<double>(cube[k]), sample_window.lo[k]);
      clip_hi[k] = std::min(static_cast<double>(cube[k] + 1), sample_window.hi[k]);
      vol *= std::max(0.0, clip_hi[k] - clip_lo[k]);
    }
    if (vol <= 0.0) return;
    Rng rng = root.stream(kTagPoints).stream(cube);
    const std::uint64_t n = rng.poisson(intensity * vol);
    for (std::uint64_t i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) x[k] = rng.uniform(clip_lo[k], clip_hi[k]);
      if (!keep.contains(std::span<const double>(x.data(), x.size()))) continue;
      centers.insert(centers.end(), x.begin(), x.end());
      radii.push_back(marks.inline_iid() ? marks.draw(rng) : 0.0);
    }
  });
}

void periodic_points(const Box& window, const Rng& root, const RadiusDrawer& marks,
                     std::vector<double>& centers, std::vector<double>& radii) {
  const int d = window.dim();
  std::vector<std::int64_t> lo(d), hi(d), cur(d);
  for (int k = 0; k < d; ++k) {
    lo[k] = static_cast<std::int64_t>(std::ceil(window.lo[k]));
    hi[k] = static_cast<std::int64_t>(std::ceil(window.hi[k]));  // half-open
    if (hi[k] <= lo[k]) return;
  }
  cur = lo;
  while (true) {
    for (int k = 0; k < d; ++k) centers.push_back(static_cast<double>(cur[k]));
    if (marks.inline_iid()) {
      Rng rng = root.stream(kTagRadii).stream(std::span<const std::int64_t>(cur.data(), cur.size()));
      radii.push_back(marks.draw(rng));
    } else {
      radii.push_back(0.0);
    }
    int k = 0;
    for (; k < d; ++k) {
      if (++cur[k] < hi[k]) break;
      cur[k] = lo[k];
    }
    if (k == d) break;
  }
}

void neyman_scott_points(const ProcessSpec& spec, const Box& window, const Rng& root,
                         const RadiusDrawer& marks, std::vector<double>& centers,
                         std::vector<double>& radii) {
  const int d = window.dim();
  const double r_c = spec.ns_params.cluster_radius_max;
  const double lambda2 = spec.ns_params.daughter_intensity;
  const Box padded = window.padded(r_c);
  const double vd = unit_ball_volume(d);
  std::vector<double> x(d), dir(d), parent(d), clip_lo(d), clip_hi(d);
  for_each_unit_cube(padded, [&](std::span<const std::int64_t> cube) {
    double vol = 1.0;
    for (int k = 0; k < d; ++k) {
      clip_lo[k] = std::max(static_cast<double>(cube[k]), padded.lo[k]);
      clip_hi[k] = std::min(static_cast<double>(cube[k] + 1), padded.hi[k]);
      vol *= std::max(0.0, clip_hi[k] - clip_lo[k]);
    }
    if (vol <= 0.0) return;
    Rng rng = root.stream(kTagParents).stream(cube);
    const std::uint64_t n_parents = rng.poisson(spec.intensity * vol);
    for (std::uint64_t p = 0; p < n_parents; ++p) {
      for (int k = 0; k < d; ++k) parent[k] = rng.uniform(clip_lo[k], clip_hi[k]);
      const double r = rng.uniform(0.0, r_c);
      const std::uint64_t n_daughters = rng.poisson(lambda2 * vd * std::pow(r, d));
      for (std::uint64_t q = 0; q < n_daughters; ++q) {
        // uniform in the ball: gaussian direction, radius r * u^{1/d}
        double norm2 = 0.0;
        do {
          norm2 = 0.0;
          for (int k = 0; k < d; ++k) {
            dir[k] = rng.normal();
            norm2 += dir[k] * dir[k];
          }
        } while (norm2 == 0.0);
        const double rad = r * std::pow(rng.uniform(), 1.0 / d) / std::sqrt(norm2);
        for (int k = 0; k < d; ++k) x[k] = parent[k] + rad * dir[k];
        if (!window.contains(std::span<const double>(x.data(), x.size()))) continue;
        centers.insert(centers.end(), x.begin(), x.end());
        radii.push_back(marks.inline_iid() ? marks.draw(rng) : 0.0);
      }
    }
  });
}

double pow_beta(double beta, int k) {
  if (k == 0) return 1.0;
  if (beta == 0.0) return 0.0;
  return std::pow(beta, k);
}

// Birth-death Metropolis-Hastings targeting alpha^n beta^{R(x)} w.r.t. the
// unit-rate Poisson reference on the padded window; starts from the empty
// configuration (always positive density, including beta = 0).
void strauss_points(const ProcessSpec& spec, const Box& window, const Rng& root,
                    const RadiusDrawer& marks, std::vector<double>& centers,
                    std::vector<double>& radii) {
  const int d = window.dim();
  const double alpha = spec.intensity;
  const double beta = spec.strauss_params.inhibition;
  const double r_c = spec.strauss_params.interaction_distance;
  const Box padded = window.padded(3.0 * r_c);
  const double vol = padded.volume();
  Rng rng = root.stream(kTagStrauss);

  std::vector<double> pts;  // flattened live configuration
  detail::SpatialHash hash(pts, d, r_c);
  const double r_c2 = r_c * r_c;

  auto count_close = [&](std::span<const double> x, std::size_t skip) {
    int c = 0;
    hash.for_candidates(x, r_c, [&](std::size_t j) {
      if (j == skip) return;
      std::span<const double> y(pts.data() + j * d, static_cast<std::size_t>(d));
      if (distance_sq(x, y) <= r_c2) ++c;
    });
    return c;
  };

  const double expected = std::max(1.0, alpha * vol);
  const std::uint64_t proposals =
      static_cast<std::uint64_t>(std::ceil(spec.strauss_params.mcmc_sweeps * expected));
  std::vector<double> cand(d);
  for (std::uint64_t step = 0; step < proposals; ++step) {
    const std::size_t n = pts.size() / d;
    if (rng.uniform() < 0.5) {
      for (int k = 0; k < d; ++k) cand[k] = rng.uniform(padded.lo[k], padded.hi[k]);
      const int dR = beta == 1.0 ? 0 : count_close(cand, static_cast<std::size_t>(-1));
      const double acc = alpha * vol * pow_beta(beta, dR) / static_cast<double>(n + 1);
      if (rng.uniform() < acc) {
        pts.insert(pts.end(), cand.begin(), cand.end());
        hash.insert(n);
      }
    } else if (n > 0) {
      const std::size_t i = std::min<std::size_t>(
          static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)), n - 1);
      std::span<const double> x(pts.data() + i * d, static_cast<std::size_t>(d));
      const int dR = beta == 1.0 ? 0 : count_close(x, i);
      double acc;
      if (beta == 0.0 && dR > 0) {
        acc = std::numeric_limits<double>::infinity();  // removing a violator
      } else {
        acc = static_cast<double>(n) / (alpha * vol * pow_beta(beta, dR));
      }
      if (rng.uniform() < acc) {
        const std::size_t last = n - 1;
        hash.erase(i);
        if (i != last) {
          hash.erase(last);
          for (int k = 0; k < d; ++k) pts[i * d + k] = pts[last * d + k];
        }
        pts.resize(last * d);
        if (i != last) hash.insert(i);
      }
    }
  }

  for (std::size_t i = 0; i * static_cast<std::size_t>(d) < pts.size(); ++i) {
    std::span<const double> x(pts.data() + i * d, static_cast<std::size_t>(d));
    if (!window.contains(x)) continue;
    centers.insert(centers.end(), x.begin(), x.end());
    radii.push_back(0.0);
  }
  if (marks.inline_iid()) {
    Rng mark_rng = root.stream(kTagRadii);
    for (double& r : radii) r = marks.draw(mark_rng);
  }
}

// In-place lower Cholesky with a deterministic ridge retry; the copula
// covariance is not guaranteed PD for every (gamma, range), so sampling
// from the nearest ridge-regularised covariance is acceptable here.
void cholesky_with_ridge(std::vector<double>& a, std::size_t n) {
  std::vector<double> saved = a;
  double ridge = 1e-10;
  for (int attempt = 0; attempt < 5; ++attempt) {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) a[i * n + i] = saved[i * n + i] + ridge;
    for (std::size_t j = 0; j < n && ok; ++j) {
      double diag = a[j * n + j];
      for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
      if (diag <= 0.0) {
        ok = false;
        break;
      }
      const double ljj = std::sqrt(diag);
      a[j * n + j] = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = a[i * n + j];
        for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
        a[i * n + j] = s / ljj;
      }
    }
    if (ok) return;
    a = saved;
    ridge *= 100.0;
  }
  throw std::runtime_error("correlated radii: covariance not factorizable");
}

void copula_radii(PointConfiguration& config, const RadiiSpec& spec, const Rng& root) {
  const std::size_t n = config.size();
  if (n == 0) return;
  if (n > 6000)
    throw std::runtime_error("correlated radii: dense copula limited to 6000 points, got " +
                             std::to_string(n));
  const double gamma = spec.correlation.decay_exponent;
  const double range = spec.correlation.range;
  // Generalized Cauchy kernel: positive definite in every dimension with
  // tail (r/range)^{-gamma}.
  std::vector<double> cov(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    cov[i * n + i] = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double r = distance(config.center(i), config.center(j));
      const double q = r / range;
      const double c = std::pow(1.0 + q * q, -0.5 * gamma);
      cov[i * n + j] = c;
      cov[j * n + i] = c;
    }
  }
  cholesky_with_ridge(cov, n);
  Rng rng = root.stream(kTagCopula);
  std::vector<double> g(n);
  for (double& v : g) v = rng.normal();
  const double inv_p = 1.0 / spec.pareto.tail_exponent;
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k <= i; ++k) z += cov[i * n + k] * g[k];
    double u = 0.5 * std::erfc(-z / 1.4142135623730951);
    u = std::min(std::max(u, 1e-16), 1.0 - 1e-16);
    config.radii[i] = spec.pareto.scale * std::pow(1.0 - u, -inv_p);
  }
}

}  // namespace

std::string to_string(ProcessKind k) {
  switch (k) {
    case ProcessKind::Periodic: return "periodic";
    case ProcessKind::Poisson: return "poisson";
    case ProcessKind::NeymanScott: return "neyman_scott";
    case ProcessKind::Strauss: return "strauss";
  }
  return "?";
}

std::string to_string(RadiiKind k) {
  switch (k) {
    case RadiiKind::Constant: return "constant";
    case RadiiKind::Pareto: return "pareto";
    case RadiiKind::LogNormal: return "lognormal";
    case RadiiKind::CorrelatedPareto: return "correlated_pareto";
  }
  return "?";
}

void ProcessSpec::validate() const {
  if (kind != ProcessKind::Periodic && !(intensity > 0.0))
    throw std::invalid_argument("process.intensity: must be > 0");
  if (kind == ProcessKind::NeymanScott) {
    if (!(ns_params.cluster_radius_max > 0.0))
      throw std::invalid_argument("process.ns_params.cluster_radius_max: must be > 0");
    if (!(ns_params.daughter_intensity >= 0.0))
      throw std::invalid_argument("process.ns_params.daughter_intensity: must be >= 0");
  }
  if (kind == ProcessKind::Strauss) {
    const auto& s = strauss_params;
    if (!(s.inhibition >= 0.0 && s.inhibition <= 1.0))
      throw std::invalid_argument("process.strauss_params.inhibition: must be in [0,1]");
    if (!(s.interaction_distance > 0.0))
      throw std::invalid_argument("process.strauss_params.interaction_distance: must be > 0");
    if (s.mcmc_sweeps < 1)
      throw std::invalid_argument("process.strauss_params.mcmc_sweeps: must be >= 1");
  }
}

double ProcessSpec::interaction_range() const {
  switch (kind) {
    case ProcessKind::NeymanScott: return ns_params.cluster_radius_max;
    case ProcessKind::Strauss: return 3.0 * strauss_params.interaction_distance;
    default: return 0.0;
  }
}

void RadiiSpec::validate(int dim) const {
  switch (kind) {
    case RadiiKind::Constant:
      if (!(constant_value >= 0.0))
        throw std::invalid_argument("radii.constant_value: must be >= 0");
      break;
    case RadiiKind::Pareto:
    case RadiiKind::CorrelatedPareto:
      if (!(pareto.scale > 0.0))
        throw std::invalid_argument("radii.pareto.scale: must be > 0");
      if (!(pareto.tail_exponent > 0.0))
        throw std::invalid_argument("radii.pareto.tail_exponent: must be > 0");
      if (!(pareto.tail_exponent > dim - 2))
        throw std::invalid_argument(
            "radii.pareto.tail_exponent: must exceed d-2 for a finite capacity moment");
      break;
    case RadiiKind::LogNormal:
      if (!(lognormal.sigma >= 0.0))
        throw std::invalid_argument("radii.lognormal.sigma: must be >= 0");
      break;
  }
  if (kind == RadiiKind::CorrelatedPareto) {
    if (!(correlation.decay_exponent > dim))
      throw std::invalid_argument("radii.correlation.decay_exponent: must exceed d");
    if (!(correlation.range > 0.0))
      throw std::invalid_argument("radii.correlation.range: must be > 0");
  }
}

PointConfiguration sample(const ProcessSpec& spec, const RadiiSpec& radii,
                          const Box& window, std::uint64_t seed) {
  spec.validate();
  radii.validate(window.dim());
  if (window.degenerate()) throw std::invalid_argument("window-degenerate: zero volume");

  PointConfiguration config;
  config.dim = window.dim();
  config.window = window;
  config.seed = seed;
  const Rng root(seed);
  const RadiusDrawer marks{radii};

  switch (spec.kind) {
    case ProcessKind::Periodic:
      periodic_points(window, root, marks, config.centers, config.radii);
      break;
    case ProcessKind::Poisson:
      poisson_points(spec.intensity, window, window, root, marks, config.centers,
                     config.radii);
      break;
    case ProcessKind::NeymanScott:
      neyman_scott_points(spec, window, root, marks, config.centers, config.radii);
      break;
    case ProcessKind::Strauss:
      strauss_points(spec, window, root, marks, config.centers, config.radii);
      break;
  }
  if (radii.kind == RadiiKind::CorrelatedPareto) copula_radii(config, radii, root);
  return config;
}

PointConfiguration sample_neyman_scott(const ProcessSpec& spec, const Box& window,
                                       std::uint64_t seed) {
  ProcessSpec s = spec;
  s.kind = ProcessKind::NeymanScott;
  RadiiSpec r;
  r.kind = RadiiKind::Constant;
  r.constant_value = 1.0;
  return sample(s, r, window, seed);
}

PointConfiguration sample_strauss(const ProcessSpec& spec, const Box& window,
                                  std::uint64_t seed) {
  ProcessSpec s = spec;
  s.kind = ProcessKind::Strauss;
  RadiiSpec r;
  r.kind = RadiiKind::Constant;
  r.constant_value = 1.0;
  return sample(s, r, window, seed);
}

PointConfiguration thin(const PointConfiguration& config, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("thin: delta must be > 0");
  PointConfiguration out;
  out.dim = config.dim;
  out.window = config.window;
  out.seed = config.seed;
  const std::size_t n = config.size();
  if (n == 0) return out;
  detail::SpatialHash hash(config.centers, config.dim, delta);
  const double d2 = delta * delta;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = config.center(i);
    bool keep = true;
    hash.for_candidates(x, delta, [&](std::size_t j) {
      if (!keep || j == i) return;
      if (distance_sq(x, config.center(j)) < d2) keep = false;
    });
    if (keep) {
      out.centers.insert(out.centers.end(), x.begin(), x.end());
      out.radii.push_back(config.radii[i]);
    }
  }
  return out;
}

CountStatistics count_statistics(const PointConfiguration& config, double cube_size) {
  if (!(cube_size > 0.0)) throw std::invalid_argument("count_statistics: cube_size must be > 0");
  const int d = config.dim;
  std::vector<std::size_t> m(d);
  std::size_t n_cubes = 1;
  for (int k = 0; k < d; ++k) {
    m[k] = static_cast<std::size_t>(std::floor(config.window.extent(k) / cube_size + 1e-9));
    if (m[k] == 0) throw std::invalid_argument("count_statistics: window smaller than one cube");
    n_cubes *= m[k];
  }
  std::vector<std::uint64_t> counts(n_cubes, 0);
  for (std::size_t i = 0; i < config.size(); ++i) {
    const auto x = config.center(i);
    std::size_t flat = 0, stride = 1;
    bool inside = true;
    for (int k = 0; k < d; ++k) {
      const auto idx = static_cast<std::size_t>(
          std::floor((x[k] - config.window.lo[k]) / cube_size));
      if (idx >= m[k]) {
        inside = false;
        break;
      }
      flat += idx * stride;
      stride *= m[k];
    }
    if (inside) ++counts[flat];
  }

  CountStatistics stats;
  stats.n_points = config.size();
  double sum = 0.0, sum2 = 0.0;
  for (std::uint64_t c : counts) {
    sum += static_cast<double>(c);
    sum2 += static_cast<double>(c) * static_cast<double>(c);
  }
  const double cube_vol = std::pow(cube_size, d);
  stats.mean_per_unit_cube = sum / static_cast<double>(n_cubes) / cube_vol;
  stats.second_moment_per_unit_cube =
      sum2 / static_cast<double>(n_cubes) / (cube_vol * cube_vol);

  // O(n^2) pair histogram, only at desk scale
  const std::size_t n = config.size();
  if (n >= 2 && n <= 4096) {
    double max_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < d; ++k) max_dist = std::min(max_dist, 0.5 * config.window.extent(k));
    const std::size_t bins = 64;
    stats.empirical_pair_counts.bin_width = max_dist / static_cast<double>(bins);
    stats.empirical_pair_counts.counts.assign(bins, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dist = distance(config.center(i), config.center(j));
        const auto b = static_cast<std::size_t>(dist / stats.empirical_pair_counts.bin_width);
        if (b < bins) ++stats.empirical_pair_counts.counts[b];
      }
  }
  return stats;
}

double mark_moment(const RadiiSpec& radii, int power) {
  switch (radii.kind) {
    case RadiiKind::Constant:
      return std::pow(radii.constant_value, power);
    case RadiiKind::Pareto:
    case RadiiKind::CorrelatedPareto: {
      const double p = radii.pareto.tail_exponent;
      if (!(p > power)) throw std::invalid_argument("infinite-moment: pareto tail_exponent <= power");
      return p * std::pow(radii.pareto.scale, power) / (p - power);
    }
    case RadiiKind::LogNormal: {
      const double k = power;
      return std::exp(k * radii.lognormal.mu +
                      0.5 * k * k * radii.lognormal.sigma * radii.lognormal.sigma);
    }
  }
  return 0.0;
}

void write_configuration(std::ostream& os, const PointConfiguration& config) {
  os << std::setprecision(17);
  os << config.dim;
  for (double v : config.window.lo) os << ' ' << v;
  for (double v : config.window.hi) os << ' ' << v;
  os << ' ' << config.seed << '\n';
  for (std::size_t i = 0; i < config.size(); ++i) {
    const auto x = config.center(i);
    for (int k = 0; k < config.dim; ++k) os << x[k] << ' ';
    os << config.radii[i] << '\n';
  }
}

PointConfiguration read_configuration(std::istream& is) {
  PointConfiguration config;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("configuration: missing header");
  std::istringstream header(line);
  if (!(header >> config.dim) || config.dim < 1)
    throw std::runtime_error("configuration: bad dimension");
  config.window.lo.resize(config.dim);
  config.window.hi.resize(config.dim);
  for (double& v : config.window.lo)
    if (!(header >> v)) throw std::runtime_error("configuration: bad window");
  for (double& v : config.window.hi)
    if (!(header >> v)) throw std::runtime_error("configuration: bad window");
  if (!(header >> config.seed)) throw std::runtime_error("configuration: bad seed");
  std::vector<double> x(config.dim);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    for (double& v : x)
      if (!(row >> v)) throw std::runtime_error("configuration: bad point line");
    double rho;
    if (!(row >> rho)) throw std::runtime_error("configuration: bad point line");
    config.centers.insert(config.centers.end(), x.begin(), x.end());
    config.radii.push_back(rho);
  }
  return config;
}

}  // namespace perfhom
