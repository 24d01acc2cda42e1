// Scaled hole sets H^eps and their good/bad partition: oversized holes,
// crowded holes, the contaminated neighbourhood of the oversized ones, and
// the safety layer D_b enclosing all bad holes.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "perfhom/box.hpp"
#include "perfhom/pointproc.hpp"

namespace perfhom {

struct HoleSet {
  int dim = 3;
  double epsilon = 0.0;
  Box domain;                  // macroscopic D
  std::vector<double> centers;  // eps * z_i, n * dim
  std::vector<double> radii;    // eps^{d/(d-2)} * rho_i
  std::vector<std::size_t> source_index;

  std::size_t size() const { return radii.size(); }
  std::span<const double> center(std::size_t i) const {
    return {centers.data() + i * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
};

enum class HoleClass : std::uint8_t { Good, Jb, Kb, Itilde };

const char* to_string(HoleClass c);

struct SafetyPrimitive {
  enum class Shape : std::uint8_t { Ball, Cube };
  Shape shape = Shape::Ball;
  std::vector<double> center;
  double extent = 0.0;  // radius (ball) or halfwidth (cube)
};

// dist(x, primitive); negative inside.
double signed_distance(std::span<const double> x, const SafetyPrimitive& p);

struct HolePartition {
  std::vector<HoleClass> klass;     // per hole
  std::vector<double> clearance;    // d_j for good holes, 0 for bad
  std::vector<std::size_t> good;    // n^eps
  std::vector<std::size_t> bad;     // I_b = jb + kb + itilde
  std::vector<std::size_t> jb, kb, itilde;
  std::vector<SafetyPrimitive> safety_layer;  // D_b
  double r_eps = 0.0;               // general case only
  double eta_eps = 0.0;             // eps * r_eps
  double cap_bad_upper = 0.0;       // subadditive Cap(H_b, D_b) bound
};

// One hole per retained point of config inside (1/eps)*domain; exact
// critical scaling radius = eps^{d/(d-2)} * rho. Requires config.window
// to cover (1/eps)*domain.
HoleSet build_holes(const PointConfiguration& config, double epsilon, const Box& domain);

// Lattice-cell partition. delta in (0, 2/(d-2)); requires
// eps <= (1/2)^{1/delta} and centres on the lattice eps*Z^d.
HolePartition partition_periodic(const HoleSet& holes, double delta);

// General partition. partition_exponent in (0, 2/(d-2)).
HolePartition partition_general(const HoleSet& holes, double partition_exponent);

// Connected components of the ball-overlap graph (|c_i - c_j| < r_i + r_j),
// singletons included, components and members sorted by index.
std::vector<std::vector<std::size_t>> detect_overlaps(const HoleSet& holes);

// Text dump: one "index class(center... radius clearance)" line per hole.
void write_partition(std::ostream& os, const HoleSet& holes, const HolePartition& part);

}  // namespace perfhom
