#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "okflow/errors.hpp"

namespace okflow {

/// Quadrature on the reference simplex. Points are stored as barycentric
/// coordinates (dim+1 per point); weights sum to the reference measure
/// (1/2 for the triangle, 1/6 for the tetrahedron). The rule integrates
/// every polynomial up to `degree` exactly.
struct QuadratureRule {
  int dim = 0;
  int degree = 0;
  std::vector<double> points;   // (dim+1) barycentric coordinates per point
  std::vector<double> weights;

  int num_points() const { return static_cast<int>(weights.size()); }
  double bary(int q, int k) const {
    return points[static_cast<std::size_t>(q) * (dim + 1) + k];
  }
};

namespace detail {

/// Gauss-Legendre nodes/weights on [0,1] by Newton iteration on the
/// three-term recurrence. Deterministic for a fixed point count.
inline void gauss_legendre_01(int n, std::vector<double>& x,
                              std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    // Chebyshev initial guess for the i-th root of P_n on [-1,1].
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[i] = 0.5 * (1.0 - t);  // descending t maps to ascending x
    w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
}

}  // namespace detail

/// Collapsed-coordinate (Duffy) Gauss rule on the reference simplex,
/// exact for all polynomials of total degree <= `degree`. Tensor orders
/// account for the Jacobian factors (1-u) and (1-u)^2 (1-v).
inline QuadratureRule simplex_quadrature(int dim, int degree) {
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("simplex_quadrature: dim must be 2 or 3");
  if (degree < 0)
    throw std::invalid_argument("simplex_quadrature: negative degree");

  QuadratureRule rule;
  rule.dim = dim;
  rule.degree = degree;

  if (dim == 2) {
    const int nu = (degree + 3) / 2;  // ceil((degree+2)/2)
    const int nv = (degree + 2) / 2;  // ceil((degree+1)/2)
    std::vector<double> xu, wu, xv, wv;
    detail::gauss_legendre_01(nu, xu, wu);
    detail::gauss_legendre_01(nv, xv, wv);
    for (int i = 0; i < nu; ++i)
      for (int j = 0; j < nv; ++j) {
        const double x = xu[i];
        const double y = xv[j] * (1.0 - xu[i]);
        rule.points.insert(rule.points.end(), {1.0 - x - y, x, y});
        rule.weights.push_back(wu[i] * wv[j] * (1.0 - xu[i]));
      }
  } else {
    const int nu = (degree + 4) / 2;
    const int nv = (degree + 3) / 2;
    const int nw = (degree + 2) / 2;
    std::vector<double> xu, wu, xv, wv, xw, ww;
    detail::gauss_legendre_01(nu, xu, wu);
    detail::gauss_legendre_01(nv, xv, wv);
    detail::gauss_legendre_01(nw, xw, ww);
    for (int i = 0; i < nu; ++i)
      for (int j = 0; j < nv; ++j)
        for (int k = 0; k < nw; ++k) {
          const double x = xu[i];
          const double y = xv[j] * (1.0 - xu[i]);
          const double z = xw[k] * (1.0 - xu[i]) * (1.0 - xv[j]);
          rule.points.insert(rule.points.end(), {1.0 - x - y - z, x, y, z});
          rule.weights.push_back(wu[i] * wv[j] * ww[k] * (1.0 - xu[i]) *
                                 (1.0 - xu[i]) * (1.0 - xv[j]));
        }
  }
  return rule;
}

}  // namespace okflow
