// Harmonic capacity: the closed-form annulus value, a finite-difference
// variational relaxation, the averaged strange-term constant C0, the
// oscillating test-function field and its empirical capacity density.
#pragma once

#include <limits>
#include <vector>

#include "perfhom/geometry.hpp"
#include "perfhom/pde.hpp"
#include "perfhom/pointproc.hpp"

namespace perfhom {

// sigma_d = H^{d-1}(S^{d-1}) = 2 pi^{d/2} / Gamma(d/2).
double sphere_surface(int dim);

enum class CapacityMethod { Analytic, FdRelaxation };

struct CapacityResult {
  double value = 0.0;
  CapacityMethod method = CapacityMethod::Analytic;
  double grid_h = 0.0;   // fd only
  int iterations = 0;    // fd only
};

// Cap(B_r, B_R) = (d-2) sigma_d / (r^{-(d-2)} - R^{-(d-2)}); R may be +inf.
CapacityResult cap_annulus_analytic(double r, double R, int dim);

struct Ball {
  std::vector<double> center;
  double radius = 0.0;
};

// Discrete relaxation: 1 on the inner balls, 0 outside the outer primitive
// union, conjugate gradients on the Laplace interior, value = discrete
// Dirichlet energy. Requires every inner ball to span >= 3 nodes across
// its diameter.
CapacityResult cap_fd(const std::vector<Ball>& inner, const std::vector<SafetyPrimitive>& outer,
                      double h, const SolverOptions& opts = {});

// Mean number of process points per unit volume <N(Q)>. Analytic for
// Periodic/Poisson/NeymanScott; Monte Carlo for Strauss (stderr_out, when
// given, receives the standard error — zero for the analytic cases).
double mean_count_per_unit_volume(const ProcessSpec& spec, int dim,
                                  double* stderr_out = nullptr);

// C0 = (d-2) sigma_d <N(Q)> <rho^{d-2}>.
double strange_term(const ProcessSpec& spec, const RadiiSpec& radii, int dim);

enum class TestFunctionFormula : std::uint8_t { CellExplicit, CapacitaryFd, Unity };

struct TestFunctionLogEntry {
  std::size_t hole_index = 0;
  TestFunctionFormula formula = TestFunctionFormula::Unity;
};

struct TestFunctionField {
  GridSpec spec;
  std::vector<double> values;  // in [0,1]; exactly 0 at nodes inside any hole
  std::vector<TestFunctionLogEntry> construction_log;
  // Dirichlet energies of the two factors as built (before the exact
  // hole-vanishing overlay, which spikes sub-grid holes on purpose).
  double good_factor_energy = 0.0;
  double bad_factor_energy = 0.0;

  // Discrete Dirichlet energy restricted to the annulus of one good hole.
  double annulus_energy(const HoleSet& holes, const HolePartition& part,
                        std::size_t hole) const;
  double total_energy() const;
};

// w_eps = w1 ^ w2: explicit radial cell profiles on the good holes,
// capacitary function of H_b in D_b where the grid resolves every bad ball
// (unity bookkeeping otherwise).
TestFunctionField build_test_function(const HolePartition& part, const HoleSet& holes,
                                      const GridSpec& grid);

// (1/|D|) sum over good holes of the exact annulus capacity
// (d-2) sigma_d / (a_j^{-(d-2)} - d_j^{-(d-2)}); tends to C0.
double empirical_strange_density(const HolePartition& part, const HoleSet& holes);

// Same sum with marks truncated at M (diagnostic for the truncation gap).
double empirical_strange_density_truncated(const HolePartition& part, const HoleSet& holes,
                                           double mark_cap);

}  // namespace perfhom
