#include "perfhom/capacity.hpp"

#include <algorithm>
#include <cmath>

#include "grid_solver.hpp"

namespace perfhom {

namespace {

constexpr double kPi = 3.14159265358979323846;

void flat_position(const GridSpec& spec, std::size_t flat, std::vector<double>& x,
                   const std::vector<std::size_t>& strides) {
  for (int k = 0; k < spec.dim; ++k) {
    const std::size_t idx = (flat / strides[k]) % static_cast<std::size_t>(spec.extents[k]);
    x[k] = spec.origin[k] + spec.h * static_cast<double>(idx);
  }
}

std::vector<std::size_t> row_major_strides(const std::vector<int>& extents) {
  std::vector<std::size_t> s(extents.size());
  std::size_t acc = 1;
  for (int k = static_cast<int>(extents.size()) - 1; k >= 0; --k) {
    s[static_cast<std::size_t>(k)] = acc;
    acc *= static_cast<std::size_t>(extents[static_cast<std::size_t>(k)]);
  }
  return s;
}

double min_signed_distance(std::span<const double> x, const std::vector<SafetyPrimitive>& prims) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : prims) best = std::min(best, signed_distance(x, p));
  return best;
}

}  // namespace

double sphere_surface(int dim) {
  if (dim < 1) throw std::invalid_argument("sphere_surface: dimension must be >= 1");
  return 2.0 * std::pow(kPi, 0.5 * dim) / std::tgamma(0.5 * dim);
}

CapacityResult cap_annulus_analytic(double r, double R, int dim) {
  if (dim < 3) throw std::invalid_argument("cap_annulus_analytic: requires d >= 3");
  if (!(r > 0.0) || !(R > r)) throw std::invalid_argument("cap_annulus_analytic: requires 0 < r < R");
  const double p = dim - 2;
  const double outer = std::isinf(R) ? 0.0 : std::pow(R, -p);
  CapacityResult res;
  res.method = CapacityMethod::Analytic;
  res.value = p * sphere_surface(dim) / (std::pow(r, -p) - outer);
  return res;
}

CapacityResult cap_fd(const std::vector<Ball>& inner, const std::vector<SafetyPrimitive>& outer,
                      double h, const SolverOptions& opts) {
  if (inner.empty()) throw std::invalid_argument("cap_fd: no inner balls");
  if (outer.empty()) throw std::invalid_argument("cap_fd: no outer region");
  if (!(h > 0.0)) throw std::invalid_argument("cap_fd: h must be > 0");
  const int d = static_cast<int>(inner.front().center.size());
  for (const auto& ball : inner) {
    if (2.0 * ball.radius < 3.0 * h * (1.0 - 1e-12))
      throw std::invalid_argument("under-resolved: inner ball must span >= 3 nodes across its diameter");
    if (min_signed_distance(std::span<const double>(ball.center.data(), ball.center.size()),
                            outer) >= 0.0)
      throw std::invalid_argument("cap_fd: inner ball centre outside the outer region");
  }

  // Grid over the outer bounding box plus a fixed-zero shell.
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& p : outer)
    for (int k = 0; k < d; ++k) {
      lo[k] = std::min(lo[k], p.center[k] - p.extent);
      hi[k] = std::max(hi[k], p.center[k] + p.extent);
    }
  detail::LaplaceSystem sys;
  sys.dim = d;
  sys.h = h;
  sys.extents.resize(d);
  std::vector<double> origin(d);
  for (int k = 0; k < d; ++k) {
    origin[k] = lo[k] - 2.0 * h;
    sys.extents[k] = static_cast<int>(std::ceil((hi[k] - lo[k]) / h - 1e-9)) + 5;
  }

  const std::size_t n = sys.node_count();
  sys.is_fixed.assign(n, 0);
  sys.fixed_value.assign(n, 0.0);
  const auto strides = row_major_strides(sys.extents);
  std::vector<double> x(d);
  GridSpec spec{d, origin, h, sys.extents};
  for (std::size_t i = 0; i < n; ++i) {
    flat_position(spec, i, x, strides);
    const std::span<const double> xs(x.data(), x.size());
    bool in_inner = false;
    for (const auto& ball : inner)
      if (distance_sq(xs, {ball.center.data(), ball.center.size()}) <=
          ball.radius * ball.radius) {
        in_inner = true;
        break;
      }
    if (in_inner) {
      sys.is_fixed[i] = 1;
      sys.fixed_value[i] = 1.0;
    } else if (min_signed_distance(xs, outer) >= 0.0) {
      sys.is_fixed[i] = 1;
      sys.fixed_value[i] = 0.0;
    }
  }

  std::vector<double> u;
  const std::vector<double> zero_rhs(n, 0.0);
  const auto stats = sys.solve(zero_rhs, u, opts.tolerance, opts.max_iterations);
  if (!stats.converged)
    throw std::runtime_error("cap_fd: conjugate gradients did not converge (residual " +
                             std::to_string(stats.rel_residual) + ")");

  CapacityResult res;
  res.method = CapacityMethod::FdRelaxation;
  res.grid_h = h;
  res.iterations = stats.iterations;
  res.value = sys.dirichlet_energy(u);
  return res;
}

double mean_count_per_unit_volume(const ProcessSpec& spec, int dim, double* stderr_out) {
  spec.validate();
  if (stderr_out) *stderr_out = 0.0;
  switch (spec.kind) {
    case ProcessKind::Periodic:
      return 1.0;
    case ProcessKind::Poisson:
      return spec.intensity;
    case ProcessKind::NeymanScott: {
      const double rc = spec.ns_params.cluster_radius_max;
      const double ball = sphere_surface(dim) / dim * std::pow(rc, dim) / (dim + 1);
      return spec.intensity * spec.ns_params.daughter_intensity * ball;
    }
    case ProcessKind::Strauss: {
      // No closed form; fixed-seed Monte Carlo keeps this deterministic.
      const int k_samples = 32;
      const Box window = Box::cube(dim, 0.0, 6.0);
      const double vol = window.volume();
      RadiiSpec marks;
      marks.kind = RadiiKind::Constant;
      marks.constant_value = 1.0;
      double sum = 0.0, sum2 = 0.0;
      for (int s = 0; s < k_samples; ++s) {
        const auto config =
            sample(spec, marks, window, 0x5354524155535300ULL + static_cast<std::uint64_t>(s));
        const double density = static_cast<double>(config.size()) / vol;
        sum += density;
        sum2 += density * density;
      }
      const double mean = sum / k_samples;
      if (stderr_out) {
        const double var = std::max(0.0, sum2 / k_samples - mean * mean);
        *stderr_out = std::sqrt(var / k_samples);
      }
      return mean;
    }
  }
  return 0.0;
}

double strange_term(const ProcessSpec& spec, const RadiiSpec& radii, int dim) {
  if (dim < 3) throw std::invalid_argument("strange_term: requires d >= 3");
  radii.validate(dim);
  const double mean_count = mean_count_per_unit_volume(spec, dim);
  const double moment = mark_moment(radii, dim - 2);
  return (dim - 2) * sphere_surface(dim) * mean_count * moment;
}

TestFunctionField build_test_function(const HolePartition& part, const HoleSet& holes,
                                      const GridSpec& grid) {
  const int d = grid.dim;
  if (d != holes.dim) throw std::invalid_argument("build_test_function: dimension mismatch");
  if (part.klass.size() != holes.size())
    throw std::invalid_argument("build_test_function: partition does not match holes");

  TestFunctionField field;
  field.spec = grid;
  field.values.assign(grid.node_count(), 1.0);
  const auto strides = row_major_strides(grid.extents);
  const double p = d - 2;

  // Node index window around a centre+radius, clamped to the grid.
  auto node_range = [&](std::span<const double> c, double radius, std::vector<int>& lo,
                        std::vector<int>& hi) {
    for (int k = 0; k < d; ++k) {
      lo[k] = std::max(0, static_cast<int>(std::ceil((c[k] - radius - grid.origin[k]) / grid.h)));
      hi[k] = std::min(grid.extents[k] - 1,
                       static_cast<int>(std::floor((c[k] + radius - grid.origin[k]) / grid.h)));
    }
  };

  std::vector<int> lo(d), hi(d), cur(d);
  std::vector<double> x(d);
  auto for_range = [&](auto&& fn) {
    for (int k = 0; k < d; ++k)
      if (lo[k] > hi[k]) return;
    cur = lo;
    while (true) {
      std::size_t flat = 0;
      for (int k = 0; k < d; ++k) {
        flat += static_cast<std::size_t>(cur[k]) * strides[k];
        x[k] = grid.origin[k] + grid.h * cur[k];
      }
      fn(flat, std::span<const double>(x.data(), x.size()));
      int k = d - 1;
      for (; k >= 0; --k) {
        if (++cur[k] <= hi[k]) break;
        cur[k] = lo[k];
      }
      if (k < 0) break;
    }
  };

  // Good holes: explicit radial cell profile where the grid resolves the
  // hole (h <= radius/3), unity bookkeeping otherwise.
  for (std::size_t j : part.good) {
    const double a = holes.radii[j];
    const double dj = part.clearance[j];
    if (!(a >= 3.0 * grid.h) || !(dj > a)) {
      field.construction_log.push_back({j, TestFunctionFormula::Unity});
      continue;
    }
    field.construction_log.push_back({j, TestFunctionFormula::CellExplicit});
    const auto c = holes.center(j);
    const double denom = std::pow(a, -p) - std::pow(dj, -p);
    node_range(c, dj, lo, hi);
    for_range([&](std::size_t flat, std::span<const double> pos) {
      const double r = distance(pos, c);
      if (r >= dj) return;
      double w;
      if (r <= a) {
        w = 0.0;
      } else {
        w = 1.0 - (std::pow(r, -p) - std::pow(dj, -p)) / denom;
      }
      field.values[flat] = std::min(field.values[flat], w);
    });
  }

  {
    detail::LaplaceSystem sys;
    sys.dim = d;
    sys.h = grid.h;
    sys.extents = grid.extents;
    field.good_factor_energy = sys.dirichlet_energy(field.values);
  }

  // Bad region: capacitary function of H_b inside D_b when every bad ball
  // is resolvable on this grid.
  if (!part.bad.empty()) {
    bool resolvable = true;
    for (std::size_t j : part.bad)
      if (2.0 * holes.radii[j] < 3.0 * grid.h) {
        resolvable = false;
        break;
      }
    if (resolvable) {
      detail::LaplaceSystem sys;
      sys.dim = d;
      sys.h = grid.h;
      sys.extents = grid.extents;
      const std::size_t n = grid.node_count();
      sys.is_fixed.assign(n, 1);  // default: outside D_b, capacitary function 0
      sys.fixed_value.assign(n, 0.0);
      std::vector<double> pos(d);
      for (std::size_t i = 0; i < n; ++i) {
        flat_position(grid, i, pos, strides);
        const std::span<const double> xs(pos.data(), pos.size());
        if (min_signed_distance(xs, part.safety_layer) < 0.0) sys.is_fixed[i] = 0;
      }
      for (std::size_t j : part.bad) {
        const auto c = holes.center(j);
        const double a = holes.radii[j];
        node_range(c, a, lo, hi);
        for_range([&](std::size_t flat, std::span<const double> xs) {
          if (distance_sq(xs, c) <= a * a) {
            sys.is_fixed[flat] = 1;
            sys.fixed_value[flat] = 1.0;
          }
        });
      }
      // Keep the shell fixed at 0 regardless of D_b spill-over.
      {
        std::vector<int> coords(d, 0);
        for (std::size_t i = 0; i < n; ++i) {
          bool shell = false;
          for (int k = 0; k < d; ++k)
            if (coords[k] == 0 || coords[k] == grid.extents[k] - 1) shell = true;
          if (shell && !sys.is_fixed[i]) {
            sys.is_fixed[i] = 1;
            sys.fixed_value[i] = 0.0;
          }
          for (int k = d - 1; k >= 0; --k) {
            if (++coords[k] < grid.extents[k]) break;
            coords[k] = 0;
          }
        }
      }
      std::vector<double> v;
      const std::vector<double> zero_rhs(n, 0.0);
      const auto stats = sys.solve(zero_rhs, v, 1e-8, 100000);
      if (!stats.converged)
        throw std::runtime_error("build_test_function: capacitary solve did not converge");
      field.bad_factor_energy = sys.dirichlet_energy(v);
      for (std::size_t i = 0; i < n; ++i)
        field.values[i] = std::min(field.values[i], 1.0 - v[i]);
      for (std::size_t j : part.bad)
        field.construction_log.push_back({j, TestFunctionFormula::CapacitaryFd});
    } else {
      for (std::size_t j : part.bad)
        field.construction_log.push_back({j, TestFunctionFormula::Unity});
    }
  }

  // (H1) exactly at grid nodes: zero inside every hole, resolvable or not.
  for (std::size_t j = 0; j < holes.size(); ++j) {
    const double a = holes.radii[j];
    if (!(a > 0.0)) continue;
    const auto c = holes.center(j);
    node_range(c, a, lo, hi);
    for_range([&](std::size_t flat, std::span<const double> xs) {
      if (distance_sq(xs, c) <= a * a) field.values[flat] = 0.0;
    });
  }

  for (double& v : field.values) v = std::clamp(v, 0.0, 1.0);
  std::sort(field.construction_log.begin(), field.construction_log.end(),
            [](const auto& a, const auto& b) { return a.hole_index < b.hole_index; });
  return field;
}

double TestFunctionField::annulus_energy(const HoleSet& holes, const HolePartition& part,
                                         std::size_t hole) const {
  const int d = spec.dim;
  const auto strides = row_major_strides(spec.extents);
  const auto c = holes.center(hole);
  const double dj = part.clearance[hole];
  const std::size_t n = spec.node_count();
  std::vector<double> x(d);
  const double scale = std::pow(spec.h, d - 2);
  double acc = 0.0;
  std::vector<int> coords(d, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) x[k] = spec.origin[k] + spec.h * coords[k];
    const bool inside = distance_sq({x.data(), x.size()}, c) < dj * dj;
    for (int k = 0; k < d; ++k) {
      if (coords[k] + 1 >= spec.extents[k]) continue;
      x[k] += spec.h;
      const bool nb_inside = distance_sq({x.data(), x.size()}, c) < dj * dj;
      x[k] -= spec.h;
      if (!inside && !nb_inside) continue;
      const double dlt = values[i + strides[k]] - values[i];
      acc += scale * dlt * dlt;
    }
    for (int k = d - 1; k >= 0; --k) {
      if (++coords[k] < spec.extents[k]) break;
      coords[k] = 0;
    }
  }
  return acc;
}

double TestFunctionField::total_energy() const {
  detail::LaplaceSystem sys;
  sys.dim = spec.dim;
  sys.h = spec.h;
  sys.extents = spec.extents;
  return sys.dirichlet_energy(values);
}

double empirical_strange_density(const HolePartition& part, const HoleSet& holes) {
  const int d = holes.dim;
  const double p = d - 2;
  const double factor = p * sphere_surface(d);
  double acc = 0.0;
  for (std::size_t j : part.good) {
    const double a = holes.radii[j];
    if (!(a > 0.0)) continue;
    const double dj = part.clearance[j];
    acc += factor / (std::pow(a, -p) - std::pow(dj, -p));
  }
  return acc / holes.domain.volume();
}

double empirical_strange_density_truncated(const HolePartition& part, const HoleSet& holes,
                                           double mark_cap) {
  const int d = holes.dim;
  const double p = d - 2;
  const double factor = p * sphere_surface(d);
  const double radius_cap =
      std::pow(holes.epsilon, static_cast<double>(d) / (d - 2)) * mark_cap;
  double acc = 0.0;
  for (std::size_t j : part.good) {
    const double a = std::min(holes.radii[j], radius_cap);
    if (!(a > 0.0)) continue;
    const double dj = part.clearance[j];
    acc += factor / (std::pow(a, -p) - std::pow(dj, -p));
  }
  return acc / holes.domain.volume();
}

}  // namespace perfhom
