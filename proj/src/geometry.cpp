#include "perfhom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

#include "perfhom/capacity.hpp"
#include "spatial_hash.hpp"

namespace perfhom {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double critical_exponent(int dim) { return static_cast<double>(dim) / (dim - 2); }

// Nearest-other-centre distance per hole, exact whenever it is < cap
// (larger values are reported as +inf; callers only compare against
// thresholds <= cap).
std::vector<double> nearest_neighbor_within(const std::vector<double>& centers, int dim,
                                            double cap) {
  const std::size_t n = centers.size() / static_cast<std::size_t>(dim);
  std::vector<double> nn(n, kInf);
  if (n < 2) return nn;
  detail::SpatialHash hash(centers, dim, cap);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> x(centers.data() + i * dim, static_cast<std::size_t>(dim));
    double best = kInf;
    hash.for_candidates(x, cap, [&](std::size_t j) {
      if (j == i) return;
      std::span<const double> y(centers.data() + j * dim, static_cast<std::size_t>(dim));
      best = std::min(best, distance_sq(x, y));
    });
    nn[i] = std::sqrt(best);
  }
  return nn;
}

double cap_bad_upper_bound(const HoleSet& holes, const std::vector<std::size_t>& bad) {
  const int d = holes.dim;
  const double factor =
      (d - 2) * sphere_surface(d) / (1.0 - std::pow(2.0, -(d - 2)));
  double sum = 0.0;
  for (std::size_t j : bad) sum += factor * std::pow(holes.radii[j], d - 2);
  return sum;
}

void finalize_partition(const HoleSet& holes, HolePartition& part) {
  const std::size_t n = holes.size();
  part.good.clear();
  part.bad.clear();
  for (std::size_t j = 0; j < n; ++j) {
    switch (part.klass[j]) {
      case HoleClass::Good: part.good.push_back(j); break;
      case HoleClass::Jb: part.jb.push_back(j); part.bad.push_back(j); break;
      case HoleClass::Kb: part.kb.push_back(j); part.bad.push_back(j); break;
      case HoleClass::Itilde: part.itilde.push_back(j); part.bad.push_back(j); break;
    }
  }
  if (part.good.size() + part.bad.size() != n)
    throw std::logic_error("partition: good/bad do not cover all holes");
  part.cap_bad_upper = cap_bad_upper_bound(holes, part.bad);
}

}  // namespace

const char* to_string(HoleClass c) {
  switch (c) {
    case HoleClass::Good: return "GOOD";
    case HoleClass::Jb: return "JB";
    case HoleClass::Kb: return "KB";
    case HoleClass::Itilde: return "ITILDE";
  }
  return "?";
}

double signed_distance(std::span<const double> x, const SafetyPrimitive& p) {
  const std::size_t d = p.center.size();
  if (p.shape == SafetyPrimitive::Shape::Ball) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double t = x[k] - p.center[k];
      s += t * t;
    }
    return std::sqrt(s) - p.extent;
  }
  double outside = 0.0, inside = -kInf;
  for (std::size_t k = 0; k < d; ++k) {
    const double t = std::abs(x[k] - p.center[k]) - p.extent;
    if (t > 0.0) outside += t * t;
    inside = std::max(inside, t);
  }
  return outside > 0.0 ? std::sqrt(outside) : inside;
}

HoleSet build_holes(const PointConfiguration& config, double epsilon, const Box& domain) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("build_holes: epsilon must be > 0");
  if (domain.dim() != config.dim) throw std::invalid_argument("build_holes: dimension mismatch");
  if (config.dim < 3) throw std::invalid_argument("build_holes: requires d >= 3");
  const Box required = domain.scaled(1.0 / epsilon);
  if (!config.window.covers(required, 1e-9 / epsilon))
    throw std::invalid_argument("window-too-small: configuration window does not cover (1/eps)D");

  HoleSet holes;
  holes.dim = config.dim;
  holes.epsilon = epsilon;
  holes.domain = domain;
  const double scale = std::pow(epsilon, critical_exponent(config.dim));
  for (std::size_t i = 0; i < config.size(); ++i) {
    const auto z = config.center(i);
    if (!required.contains(z)) continue;
    for (int k = 0; k < config.dim; ++k) holes.centers.push_back(epsilon * z[k]);
    holes.radii.push_back(scale * config.radii[i]);
    holes.source_index.push_back(i);
  }
  return holes;
}

HolePartition partition_periodic(const HoleSet& holes, double delta) {
  const int d = holes.dim;
  for (std::size_t j = 0; j < holes.size(); ++j) {
    const auto c = holes.center(j);
    for (int k = 0; k < d; ++k) {
      const double z = c[k] / holes.epsilon;
      if (std::abs(z - std::llround(z)) > 1e-9)
        throw std::invalid_argument(
            "wrong-process-kind: partition_periodic needs centres on the lattice eps*Z^d");
    }
  }
  if (!(delta > 0.0 && delta < 2.0 / (d - 2)))
    throw std::invalid_argument("partition_periodic: delta must lie in (0, 2/(d-2))");
  const double eps = holes.epsilon;
  // admissibility: 2 eps^{1+delta} <= eps, i.e. eps <= (1/2)^{1/delta}, so a
  // doubled sub-threshold ball stays inside its own lattice cell
  if (eps > std::pow(0.5, 1.0 / delta) * (1.0 + 1e-12))
    throw std::invalid_argument("epsilon-too-large: requires eps <= (1/2)^{1/delta}");

  const std::size_t n = holes.size();
  HolePartition part;
  part.klass.assign(n, HoleClass::Good);
  part.clearance.assign(n, 0.0);
  part.r_eps = 0.0;
  part.eta_eps = 0.0;

  const double threshold = std::pow(eps, 1.0 + delta);
  std::vector<std::size_t> oversized;
  for (std::size_t j = 0; j < n; ++j)
    if (holes.radii[j] >= threshold) {
      part.klass[j] = HoleClass::Jb;
      oversized.push_back(j);
    }

  // Lattice cells (side eps, centred on eps Z^d) meeting any doubled
  // oversized ball; ties count as intersecting.
  std::set<std::vector<std::int64_t>> cells;
  std::vector<std::int64_t> cell(d);
  for (std::size_t j : oversized) {
    const auto c = holes.center(j);
    const double R = 2.0 * holes.radii[j];
    std::vector<std::int64_t> lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
      lo[k] = static_cast<std::int64_t>(std::floor((c[k] - R) / eps - 0.5));
      hi[k] = static_cast<std::int64_t>(std::ceil((c[k] + R) / eps + 0.5));
    }
    cell = lo;
    while (true) {
      double dist2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double lo_face = (static_cast<double>(cell[k]) - 0.5) * eps;
        const double hi_face = (static_cast<double>(cell[k]) + 0.5) * eps;
        const double t = std::max({lo_face - c[k], c[k] - hi_face, 0.0});
        dist2 += t * t;
      }
      if (dist2 <= R * R) cells.insert(cell);
      int k = 0;
      for (; k < d; ++k) {
        if (++cell[k] < hi[k]) break;
        cell[k] = lo[k];
      }
      if (k == d) break;
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    if (part.klass[j] == HoleClass::Jb) continue;
    const auto c = holes.center(j);
    for (int k = 0; k < d; ++k)
      cell[k] = static_cast<std::int64_t>(std::llround(c[k] / eps));
    if (cells.count(cell)) part.klass[j] = HoleClass::Itilde;
  }

  part.safety_layer.reserve(cells.size());
  for (const auto& cc : cells) {
    SafetyPrimitive prim;
    prim.shape = SafetyPrimitive::Shape::Cube;
    prim.extent = 0.5 * eps;
    prim.center.resize(d);
    for (int k = 0; k < d; ++k) prim.center[k] = static_cast<double>(cc[k]) * eps;
    part.safety_layer.push_back(prim);
  }

  for (std::size_t j = 0; j < n; ++j)
    if (part.klass[j] == HoleClass::Good) part.clearance[j] = 0.5 * eps;

  finalize_partition(holes, part);
  return part;
}

HolePartition partition_general(const HoleSet& holes, double partition_exponent) {
  const int d = holes.dim;
  if (holes.size() == 0) throw std::invalid_argument("empty-configuration: no holes to partition");
  if (!(partition_exponent > 0.0 && partition_exponent < 2.0 / (d - 2)))
    throw std::invalid_argument("partition_general: exponent must lie in (0, 2/(d-2))");

  const double eps = holes.epsilon;
  const std::size_t n = holes.size();
  const double max_a = *std::max_element(holes.radii.begin(), holes.radii.end());
  const double r_eps =
      std::max(std::pow(max_a, 1.0 / d), std::pow(eps, partition_exponent / 4.0));
  const double eta = eps * r_eps;
  const double jb_threshold = 0.5 * std::min(eta, eps);

  HolePartition part;
  part.klass.assign(n, HoleClass::Good);
  part.clearance.assign(n, 0.0);
  part.r_eps = r_eps;
  part.eta_eps = eta;

  for (std::size_t j = 0; j < n; ++j)
    if (holes.radii[j] >= jb_threshold) part.klass[j] = HoleClass::Jb;

  // Crowded holes: another centre within 2.5x the hole's own radius, so the
  // half-nearest-neighbour clearance could not exceed 1.25x its radius.
  const std::vector<double> nn = nearest_neighbor_within(holes.centers, d, 2.0 * eps);
  for (std::size_t j = 0; j < n; ++j)
    if (part.klass[j] == HoleClass::Good && nn[j] <= 2.5 * holes.radii[j])
      part.klass[j] = HoleClass::Kb;

  auto dist_to_balls = [&](std::span<const double> x, const std::vector<std::size_t>& idx) {
    double best = kInf;
    for (std::size_t j : idx)
      best = std::min(best, distance(x, holes.center(j)) - 2.0 * holes.radii[j]);
    return best;
  };

  // Contamination pass, iterated to a fixed point: a hole near the current
  // safety balls joins the bad set, its own doubled ball may contaminate
  // further holes. Every surviving good hole ends with clearance above
  // 1.25x its radius, which caps the annulus factor of the capacity density
  // at 5. Brute force over the bad list is adequate at desk scale.
  std::vector<std::size_t> all_bad;
  for (std::size_t j = 0; j < n; ++j)
    if (part.klass[j] != HoleClass::Good) all_bad.push_back(j);
  for (;;) {
    bool changed = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (part.klass[j] != HoleClass::Good) continue;
      const double a = holes.radii[j];
      const double dist_db = all_bad.empty() ? kInf : dist_to_balls(holes.center(j), all_bad);
      const double dj = std::min({dist_db, 0.5 * nn[j], eps});
      if (dj <= 1.25 * a) {
        part.klass[j] = HoleClass::Itilde;
        all_bad.push_back(j);
        changed = true;
      }
    }
    if (!changed) break;
  }
  std::sort(all_bad.begin(), all_bad.end());

  part.safety_layer.reserve(all_bad.size());
  for (std::size_t j : all_bad) {
    SafetyPrimitive prim;
    prim.shape = SafetyPrimitive::Shape::Ball;
    prim.extent = 2.0 * holes.radii[j];
    const auto c = holes.center(j);
    prim.center.assign(c.begin(), c.end());
    part.safety_layer.push_back(prim);
  }

  for (std::size_t j = 0; j < n; ++j) {
    if (part.klass[j] != HoleClass::Good) continue;
    const double dist_db = all_bad.empty() ? kInf : dist_to_balls(holes.center(j), all_bad);
    const double dj = std::min({dist_db, 0.5 * nn[j], eps});
    if (!(dj > 1.25 * holes.radii[j]))
      throw std::logic_error("partition_general: good-hole clearance not above 1.5x radius");
    part.clearance[j] = dj;
  }

  finalize_partition(holes, part);
  return part;
}

std::vector<std::vector<std::size_t>> detect_overlaps(const HoleSet& holes) {
  const std::size_t n = holes.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };

  if (n > 1) {
    const double max_r = *std::max_element(holes.radii.begin(), holes.radii.end());
    const double cell = std::max(holes.epsilon, 2.0 * max_r);
    detail::SpatialHash hash(holes.centers, holes.dim, cell);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = holes.center(i);
      hash.for_candidates(x, holes.radii[i] + max_r, [&](std::size_t j) {
        if (j <= i) return;
        const double touch = holes.radii[i] + holes.radii[j];
        if (distance_sq(x, holes.center(j)) < touch * touch) unite(i, j);
      });
    }
  }

  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::ptrdiff_t> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::ptrdiff_t>(clusters.size());
      clusters.emplace_back();
    }
    clusters[static_cast<std::size_t>(slot[root])].push_back(i);
  }
  return clusters;
}

void write_partition(std::ostream& os, const HoleSet& holes, const HolePartition& part) {
  os << std::setprecision(17);
  for (std::size_t j = 0; j < holes.size(); ++j) {
    os << j << ' ' << to_string(part.klass[j]) << '(';
    const auto c = holes.center(j);
    for (int k = 0; k < holes.dim; ++k) os << c[k] << ' ';
    os << holes.radii[j] << ' ' << part.clearance[j] << ")\n";
  }
}

}  // namespace perfhom
