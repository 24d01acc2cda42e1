// Matrix-free Jacobi-preconditioned conjugate gradients for the 2d+1-point
// Laplacian (+ optional diagonal term) on a uniform grid whose outermost
// node layer is always fixed, so the interior stencil needs no bounds
// checks. Active-vector entries are kept at 0 on fixed nodes.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace perfhom::detail {

struct CgStats {
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

struct LaplaceSystem {
  int dim = 0;
  std::vector<int> extents;
  double h = 0.0;
  std::vector<std::uint8_t> is_fixed;  // per node
  std::vector<double> fixed_value;     // per node, read only where fixed
  std::vector<double> extra_diag;      // per node, may be empty

  std::size_t node_count() const {
    std::size_t n = 1;
    for (int e : extents) n *= static_cast<std::size_t>(e);
    return n;
  }

  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(dim);
    std::size_t acc = 1;
    for (int k = dim - 1; k >= 0; --k) {
      s[k] = acc;
      acc *= static_cast<std::size_t>(extents[k]);
    }
    return s;
  }

  void check_shell_fixed() const {
    const auto s = strides();
    const std::size_t n = node_count();
    std::vector<int> c(dim, 0);
    for (std::size_t i = 0; i < n; ++i) {
      bool shell = false;
      for (int k = 0; k < dim; ++k)
        if (c[k] == 0 || c[k] == extents[k] - 1) shell = true;
      if (shell && !is_fixed[i])
        throw std::logic_error("grid solver: outermost node layer must be fixed");
      for (int k = dim - 1; k >= 0; --k) {
        if (++c[k] < extents[k]) break;
        c[k] = 0;
      }
    }
    (void)s;
  }

  // y = A x with x == 0 on fixed nodes.
  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    const auto s = strides();
    const std::size_t n = node_count();
    const double inv_h2 = 1.0 / (h * h);
    const double diag0 = 2.0 * dim * inv_h2;
    const bool has_extra = !extra_diag.empty();
    for (std::size_t i = 0; i < n; ++i) {
      if (is_fixed[i]) {
        y[i] = 0.0;
        continue;
      }
      double acc = diag0 * x[i];
      for (int k = 0; k < dim; ++k) acc -= inv_h2 * (x[i - s[k]] + x[i + s[k]]);
      if (has_extra) acc += extra_diag[i] * x[i];
      y[i] = acc;
    }
  }

  // b = f + boundary lift from fixed neighbour values.
  std::vector<double> build_rhs(const std::vector<double>& f) const {
    const auto s = strides();
    const std::size_t n = node_count();
    const double inv_h2 = 1.0 / (h * h);
    std::vector<double> b(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (is_fixed[i]) continue;
      double acc = f[i];
      for (int k = 0; k < dim; ++k) {
        if (is_fixed[i - s[k]]) acc += inv_h2 * fixed_value[i - s[k]];
        if (is_fixed[i + s[k]]) acc += inv_h2 * fixed_value[i + s[k]];
      }
      b[i] = acc;
    }
    return b;
  }

  // Solves A u = rhs on the active nodes; writes fixed values into u.
  CgStats solve(const std::vector<double>& f, std::vector<double>& u, double tol,
                int max_iterations) const {
    check_shell_fixed();
    const std::size_t n = node_count();
    const std::vector<double> b = build_rhs(f);
    const double inv_h2 = 1.0 / (h * h);
    const double diag0 = 2.0 * dim * inv_h2;
    const bool has_extra = !extra_diag.empty();

    auto dot = [&](const std::vector<double>& a, const std::vector<double>& c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!is_fixed[i]) acc += a[i] * c[i];
      return acc;
    };

    std::vector<double> x(n, 0.0), r = b, z(n, 0.0), p(n, 0.0), q(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (is_fixed[i]) r[i] = 0.0;
    const double b_norm = std::sqrt(dot(b, b));
    CgStats stats;
    if (b_norm == 0.0) {
      stats.converged = true;
    } else {
      auto precondition = [&](const std::vector<double>& rr, std::vector<double>& zz) {
        for (std::size_t i = 0; i < n; ++i) {
          if (is_fixed[i]) {
            zz[i] = 0.0;
            continue;
          }
          const double diag = diag0 + (has_extra ? extra_diag[i] : 0.0);
          zz[i] = rr[i] / diag;
        }
      };
      precondition(r, z);
      p = z;
      double rz = dot(r, z);
      double rel = 1.0;
      int it = 0;
      for (; it < max_iterations; ++it) {
        apply(p, q);
        const double pq = dot(p, q);
        if (pq <= 0.0) break;
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i)
          if (!is_fixed[i]) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
          }
        rel = std::sqrt(dot(r, r)) / b_norm;
        if (rel <= tol) {
          ++it;
          break;
        }
        precondition(r, z);
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i)
          if (!is_fixed[i]) p[i] = z[i] + beta * p[i];
      }
      stats.iterations = it;
      stats.rel_residual = rel;
      stats.converged = rel <= tol;
    }

    u.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) u[i] = is_fixed[i] ? fixed_value[i] : x[i];
    return stats;
  }

  // Discrete Dirichlet energy h^{d-2} sum over grid edges of the squared
  // difference, with the given full-grid values.
  double dirichlet_energy(const std::vector<double>& u) const {
    const auto s = strides();
    const std::size_t n = node_count();
    const double scale = std::pow(h, dim - 2);
    std::vector<int> c(dim, 0);
    double acc = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < dim; ++k) {
        if (c[k] + 1 >= extents[k]) continue;
        const double dlt = u[i + s[k]] - u[i];
        const double term = scale * dlt * dlt;
        const double y = term - comp;
        const double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
      }
      for (int k = dim - 1; k >= 0; --k) {
        if (++c[k] < extents[k]) break;
        c[k] = 0;
      }
    }
    return acc;
  }
};

}  // namespace perfhom::detail
