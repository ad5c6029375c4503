#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "okflow/dense.hpp"
#include "okflow/errors.hpp"
#include "okflow/mesh.hpp"
#include "okflow/operator.hpp"
#include "okflow/sparse.hpp"
#include "okflow/vec.hpp"

namespace okflow {

/// Counts hierarchy constructions; lets tests assert that setup work is
/// done once per configuration, not once per step.
inline std::atomic<long> g_hierarchy_builds{0};

/// Geometric multigrid data for one SPD operator on a mesh chain. Level 0
/// is the finest; prolong[l] maps level l+1 coefficients to level l. The
/// hierarchy is immutable after construction and reused across all Newton
/// steps and timesteps.
struct MGHierarchy {
  std::vector<SparseMatrix> ops;
  std::vector<SparseMatrix> prolong;
  std::vector<Vector> inv_diag;
  double omega = 2.0 / 3.0;
  std::shared_ptr<CholeskyFactor> coarse_solver;

  int levels() const { return static_cast<int>(ops.size()); }
  int fine_size() const { return ops.empty() ? 0 : ops.front().rows(); }
};

/// Builds the level chain for Shat = M + eps_sqrt_c * K by repeated mesh
/// halving and Galerkin triple products. Coarsening stops at
/// min_coarse_size vertices or when the cell count per axis turns odd;
/// the coarsest level is factorized densely and may not exceed a hard cap.
inline MGHierarchy build_hierarchy(const StructuredMesh& mesh,
                                   const SparseMatrix& M,
                                   const SparseMatrix& K, double eps_sqrt_c,
                                   int min_coarse_size, double omega = 2.0 / 3.0) {
  if (M.rows() != mesh.num_vertices() || K.rows() != mesh.num_vertices())
    throw std::invalid_argument("build_hierarchy: operator size mismatch");
  if (min_coarse_size < 1)
    throw std::invalid_argument("build_hierarchy: min_coarse_size < 1");

  constexpr int kDenseCap = 2000;  // hard ceiling for the direct solve
  MGHierarchy h;
  h.omega = omega;
  h.ops.push_back(add(M, eps_sqrt_c, K));

  StructuredMesh level_mesh = mesh;
  while (h.ops.back().rows() > min_coarse_size && level_mesh.n % 2 == 0) {
    const StructuredMesh coarse = coarsen(level_mesh);
    const SparseMatrix P = prolongation(coarse, level_mesh);
    const SparseMatrix coarse_op =
        matmul(transpose(P), matmul(h.ops.back(), P));
    h.prolong.push_back(P);
    h.ops.push_back(coarse_op);
    level_mesh = coarse;
  }
  const int coarsest = h.ops.back().rows();
  if (coarsest > std::max(min_coarse_size, kDenseCap))
    throw ConfigError(
        "build_hierarchy: coarsest level too large for a direct solve; "
        "choose a grid with more factors of two");

  for (const SparseMatrix& A : h.ops) {
    Vector d = A.diagonal();
    for (double& v : d) {
      if (v <= 0.0)
        throw NumericalError("build_hierarchy: non-positive diagonal");
      v = 1.0 / v;
    }
    h.inv_diag.push_back(std::move(d));
  }
  h.coarse_solver =
      std::make_shared<CholeskyFactor>(dense_from(h.ops.back()));
  g_hierarchy_builds.fetch_add(1, std::memory_order_relaxed);
  return h;
}

namespace detail {

inline void damped_jacobi(const SparseMatrix& A, const Vector& inv_diag,
                          double omega, const Vector& b, Vector& x) {
  const Vector Ax = spmv(A, x);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] += omega * inv_diag[i] * (b[i] - Ax[i]);
}

inline Vector mg_cycle(const MGHierarchy& h, int level, const Vector& b,
                       int pre_smooths, int post_smooths) {
  if (level == h.levels() - 1) return h.coarse_solver->solve(b);

  const SparseMatrix& A = h.ops[level];
  Vector x(b.size(), 0.0);
  for (int s = 0; s < pre_smooths; ++s)
    damped_jacobi(A, h.inv_diag[level], h.omega, b, x);

  Vector r = b;
  const Vector Ax = spmv(A, x);
  axpy(-1.0, Ax, r);
  const Vector rc = spmv_transpose(h.prolong[level], r);
  const Vector ec = mg_cycle(h, level + 1, rc, pre_smooths, post_smooths);
  const Vector ef = spmv(h.prolong[level], ec);
  axpy(1.0, ef, x);

  for (int s = 0; s < post_smooths; ++s)
    damped_jacobi(A, h.inv_diag[level], h.omega, b, x);
  return x;
}

}  // namespace detail

/// One V(pre,post) cycle from a zero initial guess. For equal smooth
/// counts the map b -> x is linear and symmetric, so compositions of it
/// stay valid preconditioners for non-flexible outer solvers.
inline Vector v_cycle(const MGHierarchy& h, const Vector& b, int pre_smooths,
                      int post_smooths) {
  if (static_cast<int>(b.size()) != h.fine_size())
    throw std::invalid_argument("v_cycle: rhs dimension mismatch");
  return detail::mg_cycle(h, 0, b, pre_smooths, post_smooths);
}

/// `cycles` V-cycles composed by Richardson iteration: the standard way to
/// turn one linear cycle into a more accurate fixed linear solve.
inline Vector apply_shat_inv(const MGHierarchy& h, const Vector& b,
                             int cycles, int pre_smooths = 2,
                             int post_smooths = 2) {
  if (static_cast<int>(b.size()) != h.fine_size())
    throw std::invalid_argument("apply_shat_inv: rhs dimension mismatch");
  Vector x(b.size(), 0.0);
  Vector r = b;
  for (int cyc = 0; cyc < cycles; ++cyc) {
    const Vector e = detail::mg_cycle(h, 0, r, pre_smooths, post_smooths);
    axpy(1.0, e, x);
    if (cyc + 1 == cycles) break;
    const Vector Ax = spmv(h.ops.front(), x);
    r = b;
    axpy(-1.0, Ax, r);
  }
  return x;
}

}  // namespace okflow
