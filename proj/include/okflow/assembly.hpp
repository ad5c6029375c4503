#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "okflow/errors.hpp"
#include "okflow/mesh.hpp"
#include "okflow/quadrature.hpp"
#include "okflow/sparse.hpp"
#include "okflow/vec.hpp"

namespace okflow {

/// The assembled discrete operators shared by the time stepper and the
/// preconditioner: mass M, Neumann stiffness K, and the load of one,
/// b_i = integral of the i-th hat function.
struct OperatorSet {
  const StructuredMesh* mesh = nullptr;
  SparseMatrix M;
  SparseMatrix K;
  Vector b;
};

namespace detail {

/// Gradients of the barycentric coordinates on one cell, flattened as
/// (dim+1) x dim; also returns the cell volume.
inline double barycentric_gradients(const StructuredMesh& m, int c,
                                    std::vector<double>& grad) {
  const int d = m.dim;
  grad.assign(static_cast<std::size_t>(d + 1) * d, 0.0);
  const int v0 = m.cell_vertex(c, 0);
  if (d == 2) {
    const int v1 = m.cell_vertex(c, 1);
    const int v2 = m.cell_vertex(c, 2);
    const double ax = m.vertex(v1, 0) - m.vertex(v0, 0);
    const double ay = m.vertex(v1, 1) - m.vertex(v0, 1);
    const double bx = m.vertex(v2, 0) - m.vertex(v0, 0);
    const double by = m.vertex(v2, 1) - m.vertex(v0, 1);
    const double det = ax * by - ay * bx;
    // Rows of the inverse edge matrix give grad(lambda_1), grad(lambda_2).
    grad[1 * 2 + 0] = by / det;
    grad[1 * 2 + 1] = -bx / det;
    grad[2 * 2 + 0] = -ay / det;
    grad[2 * 2 + 1] = ax / det;
    grad[0] = -(grad[2] + grad[4]);
    grad[1] = -(grad[3] + grad[5]);
    return 0.5 * det;
  }
  double e[3][3];
  for (int k = 1; k <= 3; ++k)
    for (int dd = 0; dd < 3; ++dd)
      e[k - 1][dd] = m.vertex(m.cell_vertex(c, k), dd) - m.vertex(v0, dd);
  const double det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1]) -
                     e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0]) +
                     e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
  const double inv[3][3] = {
      {(e[1][1] * e[2][2] - e[1][2] * e[2][1]) / det,
       -(e[1][0] * e[2][2] - e[1][2] * e[2][0]) / det,
       (e[1][0] * e[2][1] - e[1][1] * e[2][0]) / det},
      {-(e[0][1] * e[2][2] - e[0][2] * e[2][1]) / det,
       (e[0][0] * e[2][2] - e[0][2] * e[2][0]) / det,
       -(e[0][0] * e[2][1] - e[0][1] * e[2][0]) / det},
      {(e[0][1] * e[1][2] - e[0][2] * e[1][1]) / det,
       -(e[0][0] * e[1][2] - e[0][2] * e[1][0]) / det,
       (e[0][0] * e[1][1] - e[0][1] * e[1][0]) / det}};
  for (int k = 1; k <= 3; ++k)
    for (int dd = 0; dd < 3; ++dd) grad[k * 3 + dd] = inv[k - 1][dd];
  for (int dd = 0; dd < 3; ++dd)
    grad[dd] = -(grad[3 + dd] + grad[6 + dd] + grad[9 + dd]);
  return det / 6.0;
}

}  // namespace detail

/// Exact P1 mass matrix from the closed-form local matrix
/// vol*(1+delta_ij)/((d+1)(d+2)).
inline SparseMatrix assemble_mass(const StructuredMesh& mesh) {
  const int d = mesh.dim;
  const int vpc = d + 1;
  const double denom = static_cast<double>((d + 1) * (d + 2));
  std::vector<Triplet> ts;
  ts.reserve(static_cast<std::size_t>(mesh.num_cells()) * vpc * vpc);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double vol = cell_volume(mesh, c);
    for (int i = 0; i < vpc; ++i)
      for (int j = 0; j < vpc; ++j)
        ts.push_back({mesh.cell_vertex(c, i), mesh.cell_vertex(c, j),
                      vol * (i == j ? 2.0 : 1.0) / denom});
  }
  SparseMatrix M = SparseMatrix::from_triplets(mesh.num_vertices(),
                                               mesh.num_vertices(),
                                               std::move(ts));
  M.mark_symmetric();
  return M;
}

/// Exact P1 Neumann stiffness matrix: local entries vol * grad_i . grad_j.
/// No boundary terms enter, which is precisely the natural (zero-flux)
/// boundary condition.
inline SparseMatrix assemble_stiffness(const StructuredMesh& mesh) {
  const int d = mesh.dim;
  const int vpc = d + 1;
  std::vector<Triplet> ts;
  ts.reserve(static_cast<std::size_t>(mesh.num_cells()) * vpc * vpc);
  std::vector<double> grad;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double vol = detail::barycentric_gradients(mesh, c, grad);
    for (int i = 0; i < vpc; ++i)
      for (int j = 0; j < vpc; ++j) {
        double g = 0.0;
        for (int dd = 0; dd < d; ++dd)
          g += grad[i * d + dd] * grad[j * d + dd];
        ts.push_back(
            {mesh.cell_vertex(c, i), mesh.cell_vertex(c, j), vol * g});
      }
  }
  SparseMatrix K = SparseMatrix::from_triplets(mesh.num_vertices(),
                                               mesh.num_vertices(),
                                               std::move(ts));
  K.mark_symmetric();
  return K;
}

/// Load vector of the constant one: b_i = vol/(d+1) accumulated per cell.
inline Vector assemble_load(const StructuredMesh& mesh) {
  Vector b(static_cast<std::size_t>(mesh.num_vertices()), 0.0);
  const double inv_vpc = 1.0 / (mesh.dim + 1);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double w = cell_volume(mesh, c) * inv_vpc;
    for (int k = 0; k <= mesh.dim; ++k) b[mesh.cell_vertex(c, k)] += w;
  }
  return b;
}

inline OperatorSet assemble_operators(const StructuredMesh& mesh) {
  OperatorSet ops;
  ops.mesh = &mesh;
  ops.M = assemble_mass(mesh);
  ops.K = assemble_stiffness(mesh);
  ops.b = assemble_load(mesh);
  return ops;
}

/// Mass matrix with the spatially varying coefficient 3u_h^2 - 1. The
/// integrand has total degree 4 (quadratic coefficient times two hats), so
/// the default rule is exact; `quad_degree` exists for over-integration
/// oracles in tests.
inline SparseMatrix assemble_coefficient_mass(const StructuredMesh& mesh,
                                              const Vector& u,
                                              int quad_degree = 4) {
  if (static_cast<int>(u.size()) != mesh.num_vertices())
    throw std::invalid_argument(
        "assemble_coefficient_mass: coefficient length mismatch");
  if (quad_degree < 4)
    throw std::invalid_argument(
        "assemble_coefficient_mass: quadrature degree below integrand "
        "degree");
  const QuadratureRule rule = simplex_quadrature(mesh.dim, quad_degree);
  const int vpc = mesh.dim + 1;
  const double ref_measure = mesh.dim == 2 ? 0.5 : 1.0 / 6.0;
  std::vector<Triplet> ts;
  ts.reserve(static_cast<std::size_t>(mesh.num_cells()) * vpc * vpc);
  std::vector<double> local(static_cast<std::size_t>(vpc) * vpc);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double scale = cell_volume(mesh, c) / ref_measure;
    std::fill(local.begin(), local.end(), 0.0);
    for (int q = 0; q < rule.num_points(); ++q) {
      double uq = 0.0;
      for (int k = 0; k < vpc; ++k)
        uq += u[mesh.cell_vertex(c, k)] * rule.bary(q, k);
      const double coef = (3.0 * uq * uq - 1.0) * rule.weights[q];
      for (int i = 0; i < vpc; ++i)
        for (int j = 0; j < vpc; ++j)
          local[i * vpc + j] += coef * rule.bary(q, i) * rule.bary(q, j);
    }
    for (int i = 0; i < vpc; ++i)
      for (int j = 0; j < vpc; ++j)
        ts.push_back({mesh.cell_vertex(c, i), mesh.cell_vertex(c, j),
                      scale * local[i * vpc + j]});
  }
  SparseMatrix Me = SparseMatrix::from_triplets(mesh.num_vertices(),
                                                mesh.num_vertices(),
                                                std::move(ts));
  Me.mark_symmetric();
  return Me;
}

/// Weak cubic term N(u)_i = integral (u_h^3 - u_h) phi_i, degree 4.
inline Vector assemble_nonlinear(const StructuredMesh& mesh, const Vector& u,
                                 int quad_degree = 4) {
  if (static_cast<int>(u.size()) != mesh.num_vertices())
    throw std::invalid_argument("assemble_nonlinear: vector length mismatch");
  if (quad_degree < 4)
    throw std::invalid_argument(
        "assemble_nonlinear: quadrature degree below integrand degree");
  const QuadratureRule rule = simplex_quadrature(mesh.dim, quad_degree);
  const int vpc = mesh.dim + 1;
  const double ref_measure = mesh.dim == 2 ? 0.5 : 1.0 / 6.0;
  Vector out(static_cast<std::size_t>(mesh.num_vertices()), 0.0);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double scale = cell_volume(mesh, c) / ref_measure;
    for (int q = 0; q < rule.num_points(); ++q) {
      double uq = 0.0;
      for (int k = 0; k < vpc; ++k)
        uq += u[mesh.cell_vertex(c, k)] * rule.bary(q, k);
      const double f = (uq * uq * uq - uq) * rule.weights[q] * scale;
      for (int i = 0; i < vpc; ++i)
        out[mesh.cell_vertex(c, i)] += f * rule.bary(q, i);
    }
  }
  return out;
}

/// Integral of the double-well density (1 - u_h^2)^2; degree 4, exact.
inline double integrate_double_well(const StructuredMesh& mesh,
                                    const Vector& u, int quad_degree = 4) {
  if (static_cast<int>(u.size()) != mesh.num_vertices())
    throw std::invalid_argument(
        "integrate_double_well: vector length mismatch");
  const QuadratureRule rule = simplex_quadrature(mesh.dim, quad_degree);
  const int vpc = mesh.dim + 1;
  const double ref_measure = mesh.dim == 2 ? 0.5 : 1.0 / 6.0;
  double total = 0.0, comp = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double scale = cell_volume(mesh, c) / ref_measure;
    double cell = 0.0;
    for (int q = 0; q < rule.num_points(); ++q) {
      double uq = 0.0;
      for (int k = 0; k < vpc; ++k)
        uq += u[mesh.cell_vertex(c, k)] * rule.bary(q, k);
      const double w = 1.0 - uq * uq;
      cell += rule.weights[q] * w * w;
    }
    const double y = cell * scale - comp;
    const double t = total + y;
    comp = (t - total) - y;
    total = t;
  }
  return total;
}

/// Nodal interpolation: evaluates f(x, y, z) at every vertex (z = 0 in 2D).
template <class F>
Vector interpolate(const StructuredMesh& mesh, F&& f) {
  Vector u(static_cast<std::size_t>(mesh.num_vertices()));
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const double x = mesh.vertex(v, 0);
    const double y = mesh.vertex(v, 1);
    const double z = mesh.dim == 3 ? mesh.vertex(v, 2) : 0.0;
    const double val = f(x, y, z);
    if (!std::isfinite(val))
      throw std::invalid_argument("interpolate: non-finite value at vertex");
    u[v] = val;
  }
  return u;
}

}  // namespace okflow
