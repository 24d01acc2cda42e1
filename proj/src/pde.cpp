#include "perfhom/pde.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "perfhom/capacity.hpp"
#include "grid_solver.hpp"

namespace perfhom {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Kahan {
  double sum = 0.0, comp = 0.0;
  void add(double x) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

std::vector<std::size_t> row_major_strides(const std::vector<int>& extents) {
  std::vector<std::size_t> s(extents.size());
  std::size_t acc = 1;
  for (int k = static_cast<int>(extents.size()) - 1; k >= 0; --k) {
    s[static_cast<std::size_t>(k)] = acc;
    acc *= static_cast<std::size_t>(extents[static_cast<std::size_t>(k)]);
  }
  return s;
}

void mark_boundary(GridField& field) {
  const int d = field.spec.dim;
  const std::size_t n = field.spec.node_count();
  std::vector<int> c(d, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k)
      if (c[k] == 0 || c[k] == field.spec.extents[k] - 1) {
        field.mask[i] = NodeState::DirichletBoundary;
        break;
      }
    for (int k = d - 1; k >= 0; --k) {
      if (++c[k] < field.spec.extents[k]) break;
      c[k] = 0;
    }
  }
}

detail::LaplaceSystem system_from_mask(const GridField& field) {
  detail::LaplaceSystem sys;
  sys.dim = field.spec.dim;
  sys.h = field.spec.h;
  sys.extents = field.spec.extents;
  const std::size_t n = field.spec.node_count();
  sys.is_fixed.assign(n, 0);
  sys.fixed_value.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (field.mask[i] != NodeState::Interior) sys.is_fixed[i] = 1;
  return sys;
}

std::pair<GridField, SolveReport> run_solve(const GridField& f, GridField masked,
                                            detail::LaplaceSystem sys, SolveMode mode,
                                            const SolverOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> u;
  const auto stats = sys.solve(f.values, u, opts.tolerance, opts.max_iterations);
  const auto t1 = std::chrono::steady_clock::now();
  if (!stats.converged)
    throw std::runtime_error("pde solve: conjugate gradients did not converge (residual " +
                             std::to_string(stats.rel_residual) + ")");
  masked.values = std::move(u);
  SolveReport report;
  report.iterations = stats.iterations;
  report.final_relative_residual = stats.rel_residual;
  report.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  report.mode = mode;
  return {std::move(masked), report};
}

}  // namespace

GridSpec make_grid(const Box& domain, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("make_grid: h must be > 0");
  GridSpec spec;
  spec.dim = domain.dim();
  spec.h = h;
  spec.origin = domain.lo;
  spec.extents.resize(spec.dim);
  for (int k = 0; k < spec.dim; ++k) {
    spec.extents[k] = static_cast<int>(std::ceil(domain.extent(k) / h - 1e-9)) + 1;
    if (spec.extents[k] < 3) throw std::invalid_argument("make_grid: fewer than 3 nodes per axis");
  }
  return spec;
}

GridField make_field(const GridSpec& spec, double value) {
  GridField field;
  field.spec = spec;
  field.values.assign(spec.node_count(), value);
  field.mask.assign(spec.node_count(), NodeState::Interior);
  return field;
}

GridField source_constant(const GridSpec& spec) { return make_field(spec, 1.0); }

GridField source_bump(const GridSpec& spec) {
  GridField field = make_field(spec, 1.0);
  const int d = spec.dim;
  const std::size_t n = spec.node_count();
  std::vector<int> c(d, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 1.0;
    for (int k = 0; k < d; ++k) {
      const double t = static_cast<double>(c[k]) / (spec.extents[k] - 1);
      const double s = std::sin(kPi * t);
      v *= s * s;
    }
    field.values[i] = v;
    for (int k = d - 1; k >= 0; --k) {
      if (++c[k] < spec.extents[k]) break;
      c[k] = 0;
    }
  }
  return field;
}

std::pair<GridField, SolveReport> solve_perforated(const HoleSet& holes, const GridField& f,
                                                   double h, SolveMode mode,
                                                   const SolverOptions& opts) {
  const GridSpec expected = make_grid(holes.domain, h);
  if (!(f.spec == expected))
    throw std::invalid_argument("f-grid mismatch: source field not on the domain grid");

  GridField u = make_field(f.spec, 0.0);
  mark_boundary(u);

  const int d = f.spec.dim;
  const auto strides = row_major_strides(f.spec.extents);
  std::vector<int> lo(d), hi(d), cur(d);
  std::vector<double> x(d);
  std::vector<double> penalty;

  auto mask_hole = [&](std::size_t j) {
    const auto c = holes.center(j);
    const double a = holes.radii[j];
    for (int k = 0; k < d; ++k) {
      lo[k] = std::max(0, static_cast<int>(std::ceil((c[k] - a - f.spec.origin[k]) / h)));
      hi[k] = std::min(f.spec.extents[k] - 1,
                       static_cast<int>(std::floor((c[k] + a - f.spec.origin[k]) / h)));
      if (lo[k] > hi[k]) return;
    }
    cur = lo;
    while (true) {
      std::size_t flat = 0;
      for (int k = 0; k < d; ++k) {
        flat += static_cast<std::size_t>(cur[k]) * strides[k];
        x[k] = f.spec.origin[k] + h * cur[k];
      }
      if (distance_sq({x.data(), x.size()}, c) <= a * a &&
          u.mask[flat] == NodeState::Interior)
        u.mask[flat] = NodeState::DirichletHole;
      int k = d - 1;
      for (; k >= 0; --k) {
        if (++cur[k] <= hi[k]) break;
        cur[k] = lo[k];
      }
      if (k < 0) break;
    }
  };

  std::vector<std::size_t> sub_grid;
  for (std::size_t j = 0; j < holes.size(); ++j) {
    const double a = holes.radii[j];
    if (mode == SolveMode::Resolved || 2.0 * a >= 3.0 * h) {
      mask_hole(j);
    } else if (a > 0.0) {
      sub_grid.push_back(j);
    }
  }

  if (!sub_grid.empty()) {
    penalty.assign(f.spec.node_count(), 0.0);
    const double outer = 0.5 * holes.epsilon;
    const double cell_vol = std::pow(h, d);
    for (std::size_t j : sub_grid) {
      const auto c = holes.center(j);
      const double a = holes.radii[j];
      if (!(a < outer)) {  // degenerate: hole at the cell scale, mask instead
        mask_hole(j);
        continue;
      }
      std::size_t flat = 0;
      for (int k = 0; k < d; ++k) {
        const int idx = std::clamp(static_cast<int>(std::llround((c[k] - f.spec.origin[k]) / h)),
                                   0, f.spec.extents[k] - 1);
        flat += static_cast<std::size_t>(idx) * strides[k];
      }
      if (u.mask[flat] == NodeState::Interior)
        penalty[flat] += cap_annulus_analytic(a, outer, d).value / cell_vol;
    }
  }

  detail::LaplaceSystem sys = system_from_mask(u);
  if (!penalty.empty()) sys.extra_diag = std::move(penalty);
  return run_solve(f, std::move(u), std::move(sys), mode, opts);
}

std::pair<GridField, SolveReport> solve_homogenized(double c0, const GridField& f, double h,
                                                    const SolverOptions& opts) {
  if (!(c0 >= 0.0)) throw std::invalid_argument("solve_homogenized: C0 must be >= 0");
  if (f.spec.h != h) throw std::invalid_argument("f-grid mismatch: source field spacing differs");
  GridField u = make_field(f.spec, 0.0);
  mark_boundary(u);
  detail::LaplaceSystem sys = system_from_mask(u);
  if (c0 > 0.0) sys.extra_diag.assign(f.spec.node_count(), c0);
  return run_solve(f, std::move(u), std::move(sys), SolveMode::Resolved, opts);
}

NormReport norms(const GridField& u, const GridField& v) {
  if (!(u.spec == v.spec)) throw std::invalid_argument("norms: grid mismatch");
  const int d = u.spec.dim;
  const std::size_t n = u.spec.node_count();
  const auto strides = row_major_strides(u.spec.extents);
  const double cell = std::pow(u.spec.h, d);
  const double edge = std::pow(u.spec.h, d - 2);

  Kahan l2_diff, l2_u, h1_diff, energy;
  std::vector<int> c(d, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double w = cell;
    for (int k = 0; k < d; ++k)
      if (c[k] == 0 || c[k] == u.spec.extents[k] - 1) w *= 0.5;
    const double diff = u.values[i] - v.values[i];
    l2_diff.add(w * diff * diff);
    l2_u.add(w * u.values[i] * u.values[i]);
    for (int k = 0; k < d; ++k) {
      if (c[k] + 1 >= u.spec.extents[k]) continue;
      const std::size_t nb = i + strides[k];
      const double du = u.values[nb] - u.values[i];
      const double dv = v.values[nb] - v.values[i];
      const double dd = du - dv;
      h1_diff.add(edge * dd * dd);
      energy.add(edge * du * du);
    }
    for (int k = d - 1; k >= 0; --k) {
      if (++c[k] < u.spec.extents[k]) break;
      c[k] = 0;
    }
  }

  NormReport report;
  report.l2_error = std::sqrt(std::max(0.0, l2_diff.sum));
  report.h1_seminorm_error = std::sqrt(std::max(0.0, h1_diff.sum));
  report.l2_norm_u = std::sqrt(std::max(0.0, l2_u.sum));
  report.energy_u = energy.sum;
  return report;
}

double weak_pairing_indicator(const GridField& u, const GridField& v) {
  if (!(u.spec == v.spec)) throw std::invalid_argument("weak_pairing_indicator: grid mismatch");
  const GridField phi = source_bump(u.spec);
  const int d = u.spec.dim;
  const std::size_t n = u.spec.node_count();
  const auto strides = row_major_strides(u.spec.extents);
  const double edge = std::pow(u.spec.h, d - 2);
  Kahan acc;
  std::vector<int> c(d, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      if (c[k] + 1 >= u.spec.extents[k]) continue;
      const std::size_t nb = i + strides[k];
      const double dw = (u.values[nb] - v.values[nb]) - (u.values[i] - v.values[i]);
      const double dphi = phi.values[nb] - phi.values[i];
      acc.add(edge * dw * dphi);
    }
    for (int k = d - 1; k >= 0; --k) {
      if (++c[k] < u.spec.extents[k]) break;
      c[k] = 0;
    }
  }
  return std::abs(acc.sum);
}

void write_field(std::ostream& os, const GridField& field) {
  os << std::setprecision(17);
  os << field.spec.dim << ' ' << field.spec.h;
  for (int e : field.spec.extents) os << ' ' << e;
  for (double o : field.spec.origin) os << ' ' << o;
  os << '\n';
  for (std::size_t i = 0; i < field.values.size(); ++i)
    os << field.values[i] << ((i + 1) % 8 == 0 ? '\n' : ' ');
  os << '\n';
}

GridField read_field(std::istream& is) {
  GridSpec spec;
  if (!(is >> spec.dim) || spec.dim < 1) throw std::runtime_error("field: bad header");
  if (!(is >> spec.h)) throw std::runtime_error("field: bad header");
  spec.extents.resize(spec.dim);
  spec.origin.resize(spec.dim);
  for (int& e : spec.extents)
    if (!(is >> e) || e < 1) throw std::runtime_error("field: bad extents");
  for (double& o : spec.origin)
    if (!(is >> o)) throw std::runtime_error("field: bad origin");
  GridField field = make_field(spec, 0.0);
  for (double& v : field.values)
    if (!(is >> v)) throw std::runtime_error("field: truncated values");
  mark_boundary(field);
  return field;
}

}  // namespace perfhom
