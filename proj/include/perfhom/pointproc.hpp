// Marked point process samplers: periodic lattice, homogeneous Poisson,
// Neyman-Scott clusters and the (repulsive) Strauss process, with iid or
// Gaussian-copula-correlated radius marks, nearest-neighbour thinning and
// counting statistics.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "perfhom/box.hpp"
#include "perfhom/rng.hpp"

namespace perfhom {

enum class ProcessKind { Periodic, Poisson, NeymanScott, Strauss };
enum class RadiiKind { Constant, Pareto, LogNormal, CorrelatedPareto };

std::string to_string(ProcessKind k);
std::string to_string(RadiiKind k);

struct NeymanScottParams {
  double cluster_radius_max = 1.0;  // R_c; daughter balls have radius ~ U(0, R_c)
  double daughter_intensity = 1.0;  // constant lambda_2
};

struct StraussParams {
  double inhibition = 0.5;          // beta in [0,1]; 0 = hard core, 1 = Poisson
  double interaction_distance = 1.0;  // r_c
  int mcmc_sweeps = 200;            // proposals = sweeps * expected count
};

struct ProcessSpec {
  ProcessKind kind = ProcessKind::Poisson;
  double intensity = 1.0;  // lambda (Poisson), alpha (Strauss), lambda_1 (NS); ignored for Periodic
  NeymanScottParams ns_params;
  StraussParams strauss_params;

  // Throws std::invalid_argument naming the offending key path.
  void validate() const;

  // Range beyond which the process cannot influence the window; sampling
  // pads by this and crops, approximating stationarity on all of R^d.
  double interaction_range() const;
};

struct ParetoParams {
  double scale = 1.0;          // rho_m
  double tail_exponent = 1.5;  // p; density p rho_m^p rho^{-(p+1)} on [rho_m, inf)
};

struct LogNormalParams {
  double mu = 0.0;
  double sigma = 1.0;
};

struct RadiiCorrelation {
  double decay_exponent = 4.0;  // gamma > d; copula covariance (1 + (r/range)^2)^{-gamma/2}
  double range = 1.0;
};

struct RadiiSpec {
  RadiiKind kind = RadiiKind::Constant;
  double constant_value = 1.0;
  ParetoParams pareto;
  LogNormalParams lognormal;
  RadiiCorrelation correlation;

  void validate(int dim) const;
};

struct PointConfiguration {
  int dim = 3;
  Box window;
  std::vector<double> centers;  // size() * dim, row-major
  std::vector<double> radii;
  std::uint64_t seed = 0;

  std::size_t size() const { return radii.size(); }
  std::span<const double> center(std::size_t i) const {
    return {centers.data() + i * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
};

struct DistanceHistogram {
  double bin_width = 0.0;
  std::vector<std::uint64_t> counts;
};

struct CountStatistics {
  std::size_t n_points = 0;
  double mean_per_unit_cube = 0.0;
  double second_moment_per_unit_cube = 0.0;
  DistanceHistogram empirical_pair_counts;
};

// Deterministic in (spec, radii, window, seed). Points are distributed per
// the selected process restricted to the window; radii attached per the
// RadiiSpec, independent of centres unless CorrelatedPareto.
PointConfiguration sample(const ProcessSpec& spec, const RadiiSpec& radii,
                          const Box& window, std::uint64_t seed);

// Internal specializations, exposed for direct testing.
PointConfiguration sample_neyman_scott(const ProcessSpec& spec, const Box& window,
                                       std::uint64_t seed);
PointConfiguration sample_strauss(const ProcessSpec& spec, const Box& window,
                                  std::uint64_t seed);

// Points whose nearest neighbour within the configuration is >= delta;
// radii carried along. Idempotent for fixed delta, monotone in delta.
PointConfiguration thin(const PointConfiguration& config, double delta);

// Counting moments over interior cubes of side cube_size (partial boundary
// cubes dropped), normalised per unit volume; pairwise-distance histogram.
CountStatistics count_statistics(const PointConfiguration& config, double cube_size);

// Analytic mark moment <rho^power>; throws on infinite moments.
double mark_moment(const RadiiSpec& radii, int power);

// Line-oriented snapshot format: header "d lo... hi... seed", then one
// "z_1 ... z_d rho" line per point, 17 significant digits.
void write_configuration(std::ostream& os, const PointConfiguration& config);
PointConfiguration read_configuration(std::istream& is);

}  // namespace perfhom
