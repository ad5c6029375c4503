#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "okflow/assembly.hpp"
#include "okflow/dense.hpp"
#include "okflow/eig.hpp"
#include "okflow/errors.hpp"
#include "okflow/krylov.hpp"
#include "okflow/mesh.hpp"
#include "okflow/operator.hpp"
#include "okflow/params.hpp"
#include "okflow/precond.hpp"
#include "okflow/sparse.hpp"
#include "okflow/vec.hpp"

namespace okflow {

/// Result of one dense spectral check of the preconditioned Schur operator.
struct SpectralReport {
  std::vector<std::complex<double>> eigenvalues;  // spectrum of St^{-1} S
  double max_imag = 0.0;     // largest |Im(lambda)|
  double max_abs = 0.0;      // largest |lambda|
  double lambda_minus = 0.0; // min(lambda_min(M^{-1} Me), 0)
  double lambda_plus = 0.0;  // max(lambda_max(M^{-1} Me), 0)
  double lo = 0.0, hi = 0.0; // predicted real enclosure
  double delta = 0.0;        // stiffness perturbation K -> K + delta*M used
  double slack = 1e-8;       // tolerance applied to the enclosure
  int violations = 0;        // eigenvalues with Re outside [lo-slack, hi+slack]
};

/// Predicted enclosure for the spectrum of the matched-preconditioned Schur
/// operator: [1/2 + sqrt(c)*min(l,0)/(2 eps), 1 + sqrt(c)*max(h,0)/(2 eps)],
/// where l, h are the extreme generalized eigenvalues of the linearized
/// double-well block against the mass matrix.
inline std::pair<double, double> lemma2_interval(double c, double eps,
                                                 double lambda_min,
                                                 double lambda_max) {
  if (!(c > 0.0))
    throw std::invalid_argument("lemma2_interval: c must be positive");
  if (!(eps > 0.0))
    throw std::invalid_argument("lemma2_interval: eps must be positive");
  const double f = std::sqrt(c) / (2.0 * eps);
  return {0.5 + f * std::min(lambda_min, 0.0),
          1.0 + f * std::max(lambda_max, 0.0)};
}

namespace detail {

/// X = M^{-1} B column by column through a dense Cholesky mass solve.
inline DenseMatrix mass_inverse_times(CholeskyFactor& mass,
                                      const DenseMatrix& B) {
  const int n = B.rows();
  DenseMatrix X(n, B.cols());
  Vector col(static_cast<std::size_t>(n));
  for (int j = 0; j < B.cols(); ++j) {
    for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = B(i, j);
    const Vector sol = mass.solve(col);
    for (int i = 0; i < n; ++i) X(i, j) = sol[static_cast<std::size_t>(i)];
  }
  return X;
}

/// Congruence transform L^{-1} A L^{-T} for a Cholesky factor L; similar to
/// P^{-1} A when P = L L^T, but far better balanced for the QR eigensolver.
inline DenseMatrix whiten(CholeskyFactor& chol, const DenseMatrix& A) {
  const int n = A.rows();
  DenseMatrix Z(n, n);
  Vector col(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = A(i, j);
    const Vector y = chol.forward(col);
    for (int i = 0; i < n; ++i) Z(i, j) = y[static_cast<std::size_t>(i)];
  }
  DenseMatrix T(n, n);
  for (int j = 0; j < n; ++j) {  // T^T = L^{-1} Z^T, column by column
    for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = Z(j, i);
    const Vector y = chol.forward(col);
    for (int i = 0; i < n; ++i) T(j, i) = y[static_cast<std::size_t>(i)];
  }
  return T;
}

}  // namespace detail

/// Dense matched approximation Shat M^{-1} Shat with Shat = M + s*K and an
/// exact mass inverse. Test/verification support only.
inline DenseMatrix matched_schur_dense(const SparseMatrix& M,
                                       const SparseMatrix& K, double c,
                                       double eps, double shat_scale = 1.0) {
  const int n = M.rows();
  if (n > 2000)
    throw std::invalid_argument("matched_schur_dense: dimension capped at 2000");
  const double s = shat_scale * eps * std::sqrt(c);
  const DenseMatrix Shd = dense_from(add(M, s, K));
  CholeskyFactor mass(dense_from(M));
  return matmul(Shd, detail::mass_inverse_times(mass, Shd));
}

/// Largest entrywise deviation of Shat M^{-1} Shat from the sum it is built
/// to match, M + eps^2 c K M^{-1} K + 2 eps sqrt(c) K, relative to the
/// largest entry. Near machine precision when the shift is unperturbed;
/// O(shat_scale - 1) otherwise, which is what makes fault injection visible.
inline double matching_identity_relative_error(const SparseMatrix& M,
                                               const SparseMatrix& K, double c,
                                               double eps,
                                               double shat_scale = 1.0) {
  const int n = M.rows();
  if (n > 2000)
    throw std::invalid_argument(
        "matching_identity_relative_error: dimension capped at 2000");
  const DenseMatrix lhs = matched_schur_dense(M, K, c, eps, shat_scale);
  const DenseMatrix Kd = dense_from(K);
  CholeskyFactor mass(dense_from(M));
  const DenseMatrix X = detail::mass_inverse_times(mass, Kd);
  const DenseMatrix KX = matmul(Kd, X);
  const DenseMatrix Md = dense_from(M);
  const double sc = 2.0 * eps * std::sqrt(c);
  double max_entry = 0.0, max_diff = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double rhs = Md(i, j) + eps * eps * c * KX(i, j) + sc * Kd(i, j);
      max_entry = std::max(max_entry, std::abs(lhs(i, j)));
      max_diff = std::max(max_diff, std::abs(lhs(i, j) - rhs));
    }
  return max_diff / max_entry;
}

/// The exact Schur complement reconstructed FROM the shifted operator:
///   Shat M^{-1} Shat - 2 s K + c Me M^{-1} K,  s = shat_scale*eps*sqrt(c).
/// For an unperturbed shift this equals S = M + eps^2 c K M^{-1} K
/// + c Me M^{-1} K identically; a perturbed shift leaves a residue in the
/// K M^{-1} K term, so downstream checks inherit the fault.
inline DenseMatrix schur_anchored_dense(const SparseMatrix& M,
                                        const SparseMatrix& K,
                                        const SparseMatrix& Me, double c,
                                        double eps, double shat_scale = 1.0) {
  const int n = M.rows();
  if (n > 2000)
    throw std::invalid_argument(
        "schur_anchored_dense: dimension capped at 2000");
  const double s = shat_scale * eps * std::sqrt(c);
  const DenseMatrix Kd = dense_from(K);
  CholeskyFactor mass(dense_from(M));
  const DenseMatrix Shd = dense_from(add(M, s, K));
  DenseMatrix out = matmul(Shd, detail::mass_inverse_times(mass, Shd));
  const DenseMatrix MeX =
      matmul(dense_from(Me), detail::mass_inverse_times(mass, Kd));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) += -2.0 * s * Kd(i, j) + c * MeX(i, j);
  return out;
}

/// Dense spectral check of the matched preconditioner at one linearization
/// point. Builds the exact Schur complement and the matched approximation
/// with the stiffness perturbed to K + delta*M (delta = 0 probes reality of
/// the spectrum; delta > 0 makes the stiffness definite so the enclosure
/// applies), whitens by the approximation's Cholesky factor, and reports the
/// full spectrum against the predicted interval. shat_scale != 1 rescales
/// the approximation's shift, reproducing an injected fault in the check.
inline SpectralReport verify_lemmas(const StructuredMesh& mesh, const Vector& u,
                                    const SolverConfig& cfg, double delta,
                                    double slack = 1e-8,
                                    double shat_scale = 1.0) {
  if (delta < 0.0)
    throw std::invalid_argument("verify_lemmas: delta must be nonnegative");
  if (mesh.num_vertices() > 2000)
    throw std::invalid_argument("verify_lemmas: mesh too large for dense path");

  const OperatorSet ops = assemble_operators(mesh);
  const SparseMatrix kp = delta > 0.0 ? add(ops.K, delta, ops.M) : ops.K;
  const SparseMatrix me = assemble_coefficient_mass(mesh, u);
  const double c = compute_c(cfg.dt, cfg.theta, cfg.sigma);
  const double eps = cfg.eps;

  const DenseMatrix S = schur_exact_dense(ops.M, kp, me, c, eps);
  const DenseMatrix St = matched_schur_dense(ops.M, kp, c, eps, shat_scale);
  CholeskyFactor st_chol(St);
  const DenseMatrix T = detail::whiten(st_chol, S);

  SpectralReport report;
  report.delta = delta;
  report.slack = slack;
  report.eigenvalues = dense_eigenvalues(T);
  for (const auto& lam : report.eigenvalues) {
    report.max_imag = std::max(report.max_imag, std::abs(lam.imag()));
    report.max_abs = std::max(report.max_abs, std::abs(lam));
  }

  const auto extremes =
      sym_generalized_extremes(dense_from(me), dense_from(ops.M));
  report.lambda_minus = std::min(extremes.first, 0.0);
  report.lambda_plus = std::max(extremes.second, 0.0);
  const auto interval = lemma2_interval(c, eps, extremes.first, extremes.second);
  report.lo = interval.first;
  report.hi = interval.second;
  for (const auto& lam : report.eigenvalues)
    if (lam.real() < report.lo - slack || lam.real() > report.hi + slack)
      ++report.violations;
  return report;
}

/// Outer-solver termination probe with EXACT inner solves: dense Cholesky
/// for the scaled mass block and dense LU for the Schur complement
/// reconstructed from the (possibly perturbed) shifted operator. With exact
/// solves the preconditioned Jacobian has a degree-two minimal polynomial,
/// so the method must reach a 1e-10 relative residual within two steps;
/// returns the iteration count (the budget cap when unconverged).
inline int two_iteration_check(const StructuredMesh& mesh, const Vector& u,
                               const SolverConfig& cfg,
                               double shat_perturb = 0.0) {
  const int max_iter = 30;
  const OperatorSet ops = assemble_operators(mesh);
  SchurContext ctx = make_schur_context(mesh, ops.M, ops.K, cfg, shat_perturb);
  const SparseMatrix me = assemble_coefficient_mass(mesh, u);
  ctx.Me = &me;

  const DenseMatrix S = schur_anchored_dense(ops.M, ops.K, me, ctx.c, ctx.eps,
                                             ctx.shat_scale);
  const int n = ctx.rows();
  CholeskyFactor a_solver(dense_from(*ctx.a_mat));
  LUFactor s_solver(S);
  const LinearOperator precond{
      2 * n, 2 * n,
      [&ctx, &a_solver, &s_solver, n](const Vector& r, Vector& y) {
        Vector r1(r.begin(), r.begin() + n);
        Vector r2(r.begin() + n, r.end());
        const Vector du = a_solver.solve(r1);
        axpy(-1.0, apply_C(ctx, du), r2);
        const Vector dw = s_solver.solve(r2);
        y.resize(2 * static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = du[i];
        for (int i = 0; i < n; ++i)
          y[static_cast<std::size_t>(n + i)] = dw[i];
      },
      "exact-block"};

  std::mt19937 rng(4321);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector b(2 * static_cast<std::size_t>(n));
  for (double& x : b) x = dist(rng);

  const KrylovResult res =
      gmres(jacobian_operator(ctx), precond, b, 1e-10, max_iter);
  return res.converged ? res.iterations : max_iter;
}

}  // namespace okflow
