#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "perfhom/capacity.hpp"
#include "perfhom/pde.hpp"

using namespace perfhom;

namespace {

constexpr double kPi = 3.14159265358979323846;

HoleSet empty_holes(double epsilon = 0.25) {
  HoleSet holes;
  holes.dim = 3;
  holes.epsilon = epsilon;
  holes.domain = Box::cube(3, 0.0, 1.0);
  return holes;
}

HoleSet holes_at(double epsilon, const std::vector<std::vector<double>>& centers,
                 const std::vector<double>& scaled_radii) {
  HoleSet holes = empty_holes(epsilon);
  for (const auto& c : centers)
    holes.centers.insert(holes.centers.end(), c.begin(), c.end());
  holes.radii = scaled_radii;
  holes.source_index.resize(scaled_radii.size());
  return holes;
}

std::size_t node_index(const GridSpec& spec, int i, int j, int k) {
  return (static_cast<std::size_t>(i) * spec.extents[1] + j) * spec.extents[2] + k;
}

}  // namespace

TEST_CASE("clean-domain solution against refinement and series oracles") {
  const double h_coarse = 1.0 / 32.0;
  const double h_fine = 1.0 / 64.0;
  const HoleSet holes = empty_holes();

  const GridSpec coarse = make_grid(holes.domain, h_coarse);
  const GridSpec fine = make_grid(holes.domain, h_fine);
  auto [u_c, rep_c] = solve_perforated(holes, source_constant(coarse), h_coarse,
                                       SolveMode::Resolved);
  auto [u_f, rep_f] = solve_perforated(holes, source_constant(fine), h_fine,
                                       SolveMode::Resolved);
  CHECK(rep_c.final_relative_residual <= 1e-8);

  // grid-refinement oracle at shared nodes
  double max_u = 0.0, max_diff = 0.0;
  for (int i = 0; i < coarse.extents[0]; ++i)
    for (int j = 0; j < coarse.extents[1]; ++j)
      for (int k = 0; k < coarse.extents[2]; ++k) {
        const double uc = u_c.values[node_index(coarse, i, j, k)];
        const double uf = u_f.values[node_index(fine, 2 * i, 2 * j, 2 * k)];
        max_u = std::max(max_u, std::abs(uf));
        max_diff = std::max(max_diff, std::abs(uc - uf));
      }
  CHECK(max_diff <= 0.01 * max_u);

  // independent separable series oracle at the centre
  const double series = oracles::unit_cube_poisson_series(0.5, 0.5, 0.5);
  const double center = u_f.values[node_index(fine, 32, 32, 32)];
  CHECK(std::abs(center - series) / series < 0.01);
}

TEST_CASE("resolved holes pin the solution to zero") {
  const double h = 1.0 / 32.0;
  const HoleSet holes = holes_at(0.25, {{0.5, 0.5, 0.5}}, {0.2});
  const GridSpec grid = make_grid(holes.domain, h);
  auto [u, rep] = solve_perforated(holes, source_constant(grid), h, SolveMode::Resolved);
  CHECK(u.values[node_index(grid, 16, 16, 16)] == 0.0);
  CHECK(u.mask[node_index(grid, 16, 16, 16)] == NodeState::DirichletHole);
  CHECK(u.values[node_index(grid, 16, 16, 16 + 6)] == 0.0);  // still inside radius 0.2
  CHECK(u.values[node_index(grid, 16, 16, 30)] > 0.0);
}

TEST_CASE("penalty mode cross-validates against a resolved fine-grid reference") {
  const double h = 1.0 / 48.0;
  // sub-threshold radii: lumped in penalty mode at h, genuinely resolved at h/4
  const HoleSet holes = holes_at(
      0.5, {{0.3, 0.3, 0.3}, {0.7, 0.6, 0.4}, {0.5, 0.72, 0.66}},
      {1.3 * h, 1.2 * h, 1.4 * h});
  const GridSpec grid = make_grid(holes.domain, h);
  const GridField f = source_constant(grid);
  auto [u_pen, rep1] = solve_perforated(holes, f, h, SolveMode::CapacityPenalty);

  const double h_fine = h / 4.0;
  const GridSpec fine = make_grid(holes.domain, h_fine);
  auto [u_ref, rep2] =
      solve_perforated(holes, source_constant(fine), h_fine, SolveMode::Resolved);
  GridField restricted = make_field(grid, 0.0);
  for (int i = 0; i < grid.extents[0]; ++i)
    for (int j = 0; j < grid.extents[1]; ++j)
      for (int k = 0; k < grid.extents[2]; ++k)
        restricted.values[node_index(grid, i, j, k)] =
            u_ref.values[node_index(fine, 4 * i, 4 * j, 4 * k)];

  // Both sides carry O(h/a) capacity-level bias (the eps/2 outer-radius
  // factor on the penalty side, mask discreteness on the reference side),
  // so the cross-check bound is looser than the coincident-mask case below.
  const auto nr = norms(u_pen, restricted);
  const auto base = norms(restricted, make_field(grid, 0.0));
  CHECK(nr.l2_error <= 0.15 * base.l2_norm_u);

  // at >= 3h the two modes coincide exactly
  const HoleSet fat = holes_at(0.5, {{0.5, 0.5, 0.5}}, {4.0 * h});
  auto [a, r1] = solve_perforated(fat, f, h, SolveMode::CapacityPenalty);
  auto [b, r2] = solve_perforated(fat, f, h, SolveMode::Resolved);
  CHECK(a.values == b.values);
}

TEST_CASE("homogenized solve limits") {
  const double h = 1.0 / 32.0;
  const GridSpec grid = make_grid(Box::cube(3, 0.0, 1.0), h);
  const GridField f = source_constant(grid);

  auto [clean, rep0] = solve_perforated(empty_holes(), f, h, SolveMode::Resolved);
  auto [c0_zero, rep1] = solve_homogenized(0.0, f, h);
  for (std::size_t i = 0; i < clean.values.size(); ++i)
    CHECK(clean.values[i] == c0_zero.values[i]);

  auto [stiff, rep2] = solve_homogenized(1e6, f, h);
  for (int i = 3; i < grid.extents[0] - 3; ++i)
    for (int j = 3; j < grid.extents[1] - 3; ++j)
      for (int k = 3; k < grid.extents[2] - 3; ++k) {
        const double v = stiff.values[node_index(grid, i, j, k)];
        CHECK(std::abs(v - 1e-6) <= 0.05 * 1e-6);
      }

  auto [damped, rep3] = solve_homogenized(4.0 * kPi, f, h);
  for (int i = 1; i < grid.extents[0] - 1; ++i)
    for (int j = 1; j < grid.extents[1] - 1; ++j)
      for (int k = 1; k < grid.extents[2] - 1; ++k) {
        const std::size_t at = node_index(grid, i, j, k);
        CHECK(damped.values[at] < c0_zero.values[at]);
      }
}

TEST_CASE("discrete maximum principle and hole monotonicity") {
  const double h = 1.0 / 32.0;
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::vector<double>> centers;
    std::vector<double> radii;
    for (int m = 0; m < 4; ++m) {
      centers.push_back({0.15 + 0.7 * rng.uniform(), 0.15 + 0.7 * rng.uniform(),
                         0.15 + 0.7 * rng.uniform()});
      radii.push_back(h * (3.0 + 3.0 * rng.uniform()));
    }
    const HoleSet fewer = holes_at(0.25, {centers.begin(), centers.begin() + 2},
                                   {radii.begin(), radii.begin() + 2});
    const HoleSet more = holes_at(0.25, centers, radii);
    const GridSpec grid = make_grid(fewer.domain, h);
    const GridField f = source_constant(grid);
    auto [u_few, r1] = solve_perforated(fewer, f, h, SolveMode::Resolved);
    auto [u_more, r2] = solve_perforated(more, f, h, SolveMode::Resolved);
    double max_val = 0.0;
    for (double v : u_few.values) max_val = std::max(max_val, v);
    for (std::size_t i = 0; i < u_few.values.size(); ++i) {
      CHECK(u_few.values[i] >= 0.0);                                // max principle
      CHECK(u_more.values[i] <= u_few.values[i] + 1e-7 * max_val);  // monotonicity
    }
  }
}

TEST_CASE("symmetric configuration gives a symmetric solution") {
  const double h = 1.0 / 32.0;
  const HoleSet holes = holes_at(0.25, {{0.5, 0.5, 0.5}}, {0.15});
  const GridSpec grid = make_grid(holes.domain, h);
  auto [u, rep] = solve_perforated(holes, source_constant(grid), h, SolveMode::Resolved);
  const int n = grid.extents[0] - 1;
  double max_asym = 0.0, max_val = 0.0;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      for (int k = 0; k <= n; ++k) {
        const double v = u.values[node_index(grid, i, j, k)];
        max_val = std::max(max_val, std::abs(v));
        max_asym = std::max(max_asym, std::abs(v - u.values[node_index(grid, n - i, j, k)]));
        max_asym = std::max(max_asym, std::abs(v - u.values[node_index(grid, j, i, k)]));
      }
  CHECK(max_asym <= 1e-6 * max_val);
}

TEST_CASE("homogenized energy identity") {
  const double h = 1.0 / 32.0;
  const GridSpec grid = make_grid(Box::cube(3, 0.0, 1.0), h);
  const GridField f = source_constant(grid);
  const double c0 = 7.5;
  SolverOptions opts;
  opts.tolerance = 1e-10;
  auto [u, rep] = solve_homogenized(c0, f, h, opts);

  // discrete identity: sum_edges h^{d-2} (du)^2 + C0 h^d sum u^2 = h^d sum f u
  const double cell = h * h * h;
  double mass = 0.0, load = 0.0;
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    mass += u.values[i] * u.values[i];
    load += f.values[i] * u.values[i] * (u.mask[i] == NodeState::Interior ? 1.0 : 0.0);
  }
  const auto nr = norms(u, make_field(grid, 0.0));
  const double lhs = nr.energy_u + c0 * cell * mass;
  const double rhs = cell * load;
  CHECK(std::abs(lhs - rhs) <= 1e-7 * std::abs(rhs));
}

TEST_CASE("norms on reference fields") {
  const GridSpec grid = make_grid(Box::cube(3, 0.0, 1.0), 1.0 / 16.0);
  const GridField ones = make_field(grid, 1.0);
  const auto same = norms(ones, ones);
  CHECK(same.l2_error == 0.0);
  CHECK(same.h1_seminorm_error == 0.0);
  CHECK(same.l2_norm_u == doctest::Approx(1.0).epsilon(1e-12));  // trapezoid is exact here

  GridField ramp = make_field(grid, 0.0);
  for (int i = 0; i < grid.extents[0]; ++i)
    for (int j = 0; j < grid.extents[1]; ++j)
      for (int k = 0; k < grid.extents[2]; ++k)
        ramp.values[node_index(grid, i, j, k)] = grid.origin[0] + grid.h * i;
  const auto ramp_norms = norms(ramp, make_field(grid, 0.0));
  CHECK(ramp_norms.h1_seminorm_error * ramp_norms.h1_seminorm_error ==
        doctest::Approx(1.0).epsilon(0.15));  // h-order: (1+h)^2 in the cross axes

  GridField other = make_field(make_grid(Box::cube(3, 0.0, 1.0), 1.0 / 8.0), 0.0);
  CHECK_THROWS_AS(norms(ones, other), std::invalid_argument);
}

TEST_CASE("weak pairing indicator vanishes on equal fields") {
  const GridSpec grid = make_grid(Box::cube(3, 0.0, 1.0), 1.0 / 16.0);
  const GridField f = source_bump(grid);
  CHECK(weak_pairing_indicator(f, f) == 0.0);
  const GridField zero = make_field(grid, 0.0);
  CHECK(weak_pairing_indicator(f, zero) > 0.0);
}

TEST_CASE("solver error paths") {
  const double h = 1.0 / 16.0;
  const HoleSet holes = empty_holes();
  const GridSpec wrong = make_grid(Box::cube(3, 0.0, 1.0), 1.0 / 8.0);
  CHECK_THROWS_WITH_AS(solve_perforated(holes, source_constant(wrong), h, SolveMode::Resolved),
                       doctest::Contains("f-grid mismatch"), std::invalid_argument);

  const GridSpec grid = make_grid(holes.domain, h);
  SolverOptions strict;
  strict.max_iterations = 1;
  CHECK_THROWS_AS(solve_perforated(holes, source_constant(grid), h, SolveMode::Resolved, strict),
                  std::runtime_error);
}

TEST_CASE("grid field io round trip") {
  const GridSpec grid = make_grid(Box::cube(3, 0.0, 1.0), 0.25);
  GridField f = source_bump(grid);
  std::stringstream buffer;
  write_field(buffer, f);
  const GridField back = read_field(buffer);
  CHECK(back.spec == f.spec);
  CHECK(back.values == f.values);
}
