// Finite-difference Dirichlet solvers on a regular grid: the perforated
// Poisson problem (resolved holes or capacity-equivalent point penalties)
// and the homogenized reaction-diffusion problem, plus grid norms.
#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "perfhom/box.hpp"
#include "perfhom/geometry.hpp"

namespace perfhom {

enum class NodeState : std::uint8_t {
  Interior,            // unknown
  DirichletHole,       // value pinned to 0 inside a hole
  DirichletBoundary,   // value pinned to 0 on the boundary of D
  Exterior,            // outside the domain (unused for box domains)
};

struct GridSpec {
  int dim = 3;
  std::vector<double> origin;
  double h = 0.0;
  std::vector<int> extents;  // nodes per axis

  std::size_t node_count() const {
    std::size_t n = 1;
    for (int e : extents) n *= static_cast<std::size_t>(e);
    return n;
  }
  bool operator==(const GridSpec& o) const = default;
};

// Nodes at origin + h*(i_1..i_d) covering the closure of D.
GridSpec make_grid(const Box& domain, double h);

struct GridField {
  GridSpec spec;
  std::vector<double> values;
  std::vector<NodeState> mask;

  double& at(std::size_t flat) { return values[flat]; }
  double at(std::size_t flat) const { return values[flat]; }
};

GridField make_field(const GridSpec& spec, double value = 0.0);
// f == 1 on D.
GridField source_constant(const GridSpec& spec);
// Smooth bump prod_k sin^2(pi x_k / L_k), vanishing on the boundary of D.
GridField source_bump(const GridSpec& spec);

enum class SolveMode { Resolved, CapacityPenalty };

struct SolveReport {
  int iterations = 0;
  double final_relative_residual = 0.0;
  double wall_time_ms = 0.0;
  SolveMode mode = SolveMode::Resolved;
};

struct SolverOptions {
  double tolerance = 1e-8;  // relative residual
  int max_iterations = 100000;
};

// -Laplace u = f in D minus the holes, u = 0 on holes and on the boundary.
// Resolved mode masks every node inside a hole; penalty mode replaces each
// hole of diameter < 3h by a capacity-equivalent diagonal term at the node
// nearest its centre (outer radius eps/2 in the annulus formula) and masks
// the rest as in resolved mode.
std::pair<GridField, SolveReport> solve_perforated(const HoleSet& holes, const GridField& f,
                                                   double h, SolveMode mode,
                                                   const SolverOptions& opts = {});

// (-Laplace + C0) u = f with u = 0 on the boundary of D.
std::pair<GridField, SolveReport> solve_homogenized(double c0, const GridField& f, double h,
                                                    const SolverOptions& opts = {});

struct NormReport {
  double l2_error = 0.0;
  double h1_seminorm_error = 0.0;
  double l2_norm_u = 0.0;
  double energy_u = 0.0;  // discrete Dirichlet energy of u
};

// Composite-trapezoid L2, forward-difference H1 seminorm; compensated
// accumulation in a fixed traversal order.
NormReport norms(const GridField& u, const GridField& v);

// |integral grad(u - v) . grad(phi)| for the built-in smooth bump phi.
double weak_pairing_indicator(const GridField& u, const GridField& v);

// Text format: header "d h n_1..n_d origin_1..origin_d", then node values
// in row-major order, 17 significant digits.
void write_field(std::ostream& os, const GridField& field);
GridField read_field(std::istream& is);

}  // namespace perfhom
