#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace perfhom {

// Axis-aligned box, half-open [lo, hi) per axis.
struct Box {
  std::vector<double> lo, hi;

  Box() = default;
  Box(std::vector<double> lo_, std::vector<double> hi_)
      : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw std::invalid_argument("box: lo/hi dimension mismatch");
  }

  static Box cube(int dim, double a, double b) {
    return Box(std::vector<double>(dim, a), std::vector<double>(dim, b));
  }

  int dim() const { return static_cast<int>(lo.size()); }

  double extent(int k) const { return hi[k] - lo[k]; }

  double volume() const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= extent(k);
    return v;
  }

  bool degenerate() const {
    for (int k = 0; k < dim(); ++k)
      if (!(hi[k] > lo[k])) return true;
    return dim() == 0;
  }

  bool contains(std::span<const double> x) const {
    for (int k = 0; k < dim(); ++k)
      if (x[k] < lo[k] || x[k] >= hi[k]) return false;
    return true;
  }

  // b lies inside this box (up to tol on each face).
  bool covers(const Box& b, double tol = 0.0) const {
    for (int k = 0; k < dim(); ++k)
      if (b.lo[k] < lo[k] - tol || b.hi[k] > hi[k] + tol) return false;
    return true;
  }

  Box padded(double pad) const {
    Box out = *this;
    for (int k = 0; k < dim(); ++k) {
      out.lo[k] -= pad;
      out.hi[k] += pad;
    }
    return out;
  }

  Box scaled(double c) const {
    Box out = *this;
    for (int k = 0; k < dim(); ++k) {
      out.lo[k] *= c;
      out.hi[k] *= c;
    }
    return out;
  }
};

inline double distance_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(distance_sq(a, b));
}

}  // namespace perfhom
