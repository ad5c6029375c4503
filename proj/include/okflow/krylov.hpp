#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "okflow/dense.hpp"
#include "okflow/eig.hpp"
#include "okflow/errors.hpp"
#include "okflow/operator.hpp"
#include "okflow/sparse.hpp"
#include "okflow/vec.hpp"

namespace okflow {

struct KrylovResult {
  Vector x;
  int iterations = 0;
  std::vector<double> residual_norms;  // true-residual norms, starting at r0
  bool converged = false;
  bool stagnated = false;      // Arnoldi breakdown with residual above tol
  double final_residual = 0.0;  // recomputed ||b - A x|| at exit
};

namespace detail {

inline void apply_givens(double c, double s, double& a, double& b) {
  const double t = c * a + s * b;
  b = -s * a + c * b;
  a = t;
}

}  // namespace detail

/// Right-preconditioned GMRES from a zero initial guess. With right
/// preconditioning the Arnoldi least-squares residual equals the true
/// residual of the original system, so the recorded norms are true-residual
/// norms and non-increasing within a cycle. restart = 0 means full GMRES.
inline KrylovResult gmres(const LinearOperator& op,
                          const LinearOperator& right_precond, const Vector& b,
                          double rel_tol, int max_iter, int restart = 0) {
  const int n = op.rows();
  if (op.cols() != n || right_precond.rows() != n || right_precond.cols() != n)
    throw std::invalid_argument("gmres: operator dimensions mismatch");
  if (static_cast<int>(b.size()) != n)
    throw std::invalid_argument("gmres: rhs dimension mismatch");
  require_finite(b, "gmres rhs");

  KrylovResult res;
  res.x.assign(static_cast<std::size_t>(n), 0.0);
  const double norm_b = norm2(b);
  res.residual_norms.push_back(norm_b);
  if (norm_b == 0.0) {
    res.converged = true;
    return res;
  }
  const double target = rel_tol * norm_b;
  const int cycle_len = restart > 0 ? std::min(restart, max_iter) : max_iter;

  Vector r = b;  // residual of current outer iterate (x starts at zero)
  double beta = norm_b;

  while (res.iterations < max_iter) {
    // Arnoldi basis for K(A P^{-1}, r); H stored column-wise.
    std::vector<Vector> V;
    V.push_back(scaled(r, 1.0 / beta));
    std::vector<std::vector<double>> H;
    std::vector<double> cs, sn;
    std::vector<double> g{beta};
    int j = 0;
    bool breakdown = false;

    while (j < cycle_len && res.iterations < max_iter) {
      Vector z = right_precond(V[j]);
      Vector w = op(z);
      const double w_scale = norm2(w);
      std::vector<double> h(static_cast<std::size_t>(j) + 2, 0.0);
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        h[i] = dot(w, V[i]);
        axpy(-h[i], V[i], w);
      }
      // One refinement pass keeps the basis orthogonal on hard problems.
      for (int i = 0; i <= j; ++i) {
        const double c = dot(w, V[i]);
        h[i] += c;
        axpy(-c, V[i], w);
      }
      const double arnoldi_norm = norm2(w);
      h[j + 1] = arnoldi_norm;

      for (int i = 0; i < j; ++i) detail::apply_givens(cs[i], sn[i], h[i], h[i + 1]);
      const double denom = std::hypot(h[j], h[j + 1]);
      if (denom == 0.0) {  // column added nothing: residual cannot move
        breakdown = true;
        break;
      }
      const double c = h[j] / denom;
      const double s = h[j + 1] / denom;
      h[j] = denom;
      cs.push_back(c);
      sn.push_back(s);
      g.push_back(0.0);
      detail::apply_givens(c, s, g[j], g[j + 1]);

      H.push_back(std::move(h));
      ++res.iterations;
      ++j;
      const double est = std::abs(g[j]);
      res.residual_norms.push_back(est);

      if (est <= target) break;
      if (arnoldi_norm <= 1e-13 * w_scale) {  // breakdown above tolerance
        breakdown = true;
        break;
      }
      V.push_back(scaled(w, 1.0 / arnoldi_norm));
    }

    // Solve the triangular system H y = g and expand the correction.
    Vector y(static_cast<std::size_t>(j), 0.0);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= H[k][i] * y[k];
      y[i] = H[i][i] != 0.0 ? s / H[i][i] : 0.0;
    }
    Vector u(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < j; ++i) axpy(y[i], V[i], u);
    axpy(1.0, right_precond(u), res.x);

    Vector Ax = op(res.x);
    r = b;
    axpy(-1.0, Ax, r);
    beta = norm2(r);
    res.final_residual = beta;

    if (beta <= target * (1.0 + 1e-9)) {
      res.converged = true;
      return res;
    }
    if (breakdown) {
      res.stagnated = true;
      return res;
    }
    if (restart <= 0) return res;  // full GMRES exhausted its budget
  }
  return res;
}

/// Chebyshev-accelerated stationary iteration from a zero initial guess.
/// lambda_min/lambda_max must bound the spectrum of P^{-1}A. For fixed k
/// and fixed bounds the map b -> x_k is linear, which makes the routine a
/// valid preconditioner inside non-flexible GMRES.
inline Vector chebyshev_semi_iteration(const LinearOperator& A,
                                       const LinearOperator& P_inv,
                                       const Vector& b, int k,
                                       double lambda_min, double lambda_max) {
  if (lambda_min <= 0.0)
    throw std::invalid_argument("chebyshev: lambda_min must be positive");
  if (lambda_max < lambda_min)
    throw std::invalid_argument("chebyshev: bounds out of order");
  if (k < 1) throw std::invalid_argument("chebyshev: need at least one step");
  require_finite(b, "chebyshev rhs");

  const double theta = 0.5 * (lambda_max + lambda_min);
  const double delta = 0.5 * (lambda_max - lambda_min);

  Vector x(b.size(), 0.0);
  Vector r = b;
  Vector z = P_inv(r);
  Vector d = scaled(z, 1.0 / theta);

  if (delta <= 1e-300) {  // spectrum is a point: plain Richardson steps
    for (int j = 0; j < k; ++j) {
      axpy(1.0, d, x);
      Vector Ad = A(d);
      axpy(-1.0, Ad, r);
      z = P_inv(r);
      d = scaled(z, 1.0 / theta);
    }
    return x;
  }

  const double sigma1 = theta / delta;
  double rho = 1.0 / sigma1;
  for (int j = 0; j < k; ++j) {
    axpy(1.0, d, x);
    if (j + 1 == k) break;  // last correction applied; skip dead updates
    Vector Ad = A(d);
    axpy(-1.0, Ad, r);
    z = P_inv(r);
    const double rho_next = 1.0 / (2.0 * sigma1 - rho);
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = rho_next * rho * d[i] + 2.0 * rho_next / delta * z[i];
    rho = rho_next;
  }
  return x;
}

inline Vector chebyshev_semi_iteration(const SparseMatrix& A,
                                       const Vector& diag_precond,
                                       const Vector& b, int k,
                                       double lambda_min, double lambda_max) {
  if (static_cast<int>(diag_precond.size()) != A.rows())
    throw std::invalid_argument("chebyshev: diagonal length mismatch");
  for (double v : diag_precond)
    if (v <= 0.0)
      throw std::invalid_argument("chebyshev: diagonal must be positive");
  LinearOperator op = make_matrix_operator(A);
  LinearOperator P_inv{
      A.rows(), A.rows(),
      [&diag_precond](const Vector& r, Vector& z) {
        z.resize(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / diag_precond[i];
      },
      "diag"};
  return chebyshev_semi_iteration(op, P_inv, b, k, lambda_min, lambda_max);
}

/// k preconditioned Richardson steps from zero: x_{j+1} = x_j + P^{-1}(b - A x_j).
inline Vector richardson(const LinearOperator& apply_A,
                         const LinearOperator& apply_P_inv, const Vector& b,
                         int k) {
  if (apply_A.rows() != static_cast<int>(b.size()))
    throw std::invalid_argument("richardson: dimension mismatch");
  require_finite(b, "richardson rhs");
  Vector x(b.size(), 0.0);
  Vector r = b;
  for (int j = 0; j < k; ++j) {
    Vector z = apply_P_inv(r);
    axpy(1.0, z, x);
    if (j + 1 == k) break;
    Vector Ax = apply_A(x);
    r = b;
    axpy(-1.0, Ax, r);
  }
  return x;
}

namespace detail {

/// Symmetric Lanczos with full reorthogonalization; returns the extreme
/// Ritz values of apply_B after `steps` iterations.
inline std::pair<double, double> lanczos_extremes(
    const std::function<Vector(const Vector&)>& apply_B, int n, int steps,
    unsigned seed) {
  steps = std::min(steps, n);
  if (steps < 1) throw std::invalid_argument("lanczos: need a step budget");
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  std::vector<Vector> V;
  Vector v(static_cast<std::size_t>(n));
  for (double& e : v) e = dist(rng);
  scal(1.0 / norm2(v), v);
  V.push_back(v);

  std::vector<double> alpha, beta;
  for (int j = 0; j < steps; ++j) {
    Vector w = apply_B(V[j]);
    const double a = dot(w, V[j]);
    alpha.push_back(a);
    axpy(-a, V[j], w);
    if (j > 0) axpy(-beta[j - 1], V[j - 1], w);
    for (const Vector& q : V) axpy(-dot(w, q), q, w);  // full reorth
    const double nb = norm2(w);
    if (nb <= 1e-13 * std::abs(a) + 1e-300) break;  // invariant subspace hit
    if (j + 1 < steps) {
      beta.push_back(nb);
      V.push_back(scaled(w, 1.0 / nb));
    }
  }

  const int m = static_cast<int>(alpha.size());
  DenseMatrix T(m, m);
  for (int i = 0; i < m; ++i) {
    T(i, i) = alpha[i];
    if (i + 1 < m) {
      T(i, i + 1) = beta[i];
      T(i + 1, i) = beta[i];
    }
  }
  auto ritz = symmetric_eigenvalues(std::move(T));
  return {ritz.front(), ritz.back()};
}

}  // namespace detail

/// Bounds on the spectrum of diag(A)^{-1} A for an SPD matrix, from Lanczos
/// on the similar symmetric matrix D^{-1/2} A D^{-1/2}. The extreme Ritz
/// values are widened (x0.9 below, x1.1 above) to cover Lanczos optimism.
inline std::pair<double, double> estimate_jacobi_spectrum(
    const SparseMatrix& A, int probes = 30, unsigned seed = 1234u) {
  if (A.rows() != A.cols())
    throw std::invalid_argument("estimate_jacobi_spectrum: matrix not square");
  Vector d = A.diagonal();
  Vector dsqrt(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] <= 0.0)
      throw NumericalError("estimate_jacobi_spectrum: non-positive diagonal");
    dsqrt[i] = std::sqrt(d[i]);
  }
  auto apply_B = [&](const Vector& x) {
    Vector t(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) t[i] = x[i] / dsqrt[i];
    Vector y = spmv(A, t);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] /= dsqrt[i];
    return y;
  };
  auto [lo, hi] = detail::lanczos_extremes(apply_B, A.rows(), probes, seed);
  if (lo < 0.0)
    throw NumericalError(
        "estimate_jacobi_spectrum: negative Ritz value, matrix not positive "
        "definite");
  return {0.9 * lo, 1.1 * hi};
}

/// Forward/backward sweeps for the symmetric SOR preconditioner
/// P = (D/w + L) ((2-w)/w D)^{-1} ... kept in factored form E^T E with
/// E = sqrt((2-w)/w) D^{1/2} (D/w + L)^{-1}, so spectra can be probed
/// through the symmetric product E A E^T.
class SsorSweeps {
 public:
  SsorSweeps(const SparseMatrix& A, double omega) : A_(&A), omega_(omega) {
    if (omega <= 0.0 || omega >= 2.0)
      throw std::invalid_argument("ssor: omega must lie in (0, 2)");
    diag_ = A.diagonal();
    for (double v : diag_)
      if (v <= 0.0) throw std::invalid_argument("ssor: non-positive diagonal");
  }

  /// Solves (D/w + L) x = r by forward substitution.
  Vector forward(const Vector& r) const {
    const int n = A_->rows();
    Vector x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double s = r[i];
      for (int k = A_->row_ptr()[i]; k < A_->row_ptr()[i + 1]; ++k) {
        const int j = A_->col_idx()[k];
        if (j >= i) break;
        s -= A_->values()[k] * x[j];
      }
      x[i] = s * omega_ / diag_[i];
    }
    return x;
  }

  /// Solves (D/w + U) x = r by backward substitution.
  Vector backward(const Vector& r) const {
    const int n = A_->rows();
    Vector x(static_cast<std::size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
      double s = r[i];
      for (int k = A_->row_ptr()[i + 1] - 1; k >= A_->row_ptr()[i]; --k) {
        const int j = A_->col_idx()[k];
        if (j <= i) break;
        s -= A_->values()[k] * x[j];
      }
      x[i] = s * omega_ / diag_[i];
    }
    return x;
  }

  /// z = P^{-1} r for the full SSOR preconditioner.
  Vector apply_inv(const Vector& r) const {
    Vector t = forward(r);
    const double g = (2.0 - omega_) / omega_;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= g * diag_[i];
    return backward(t);
  }

  double omega() const { return omega_; }
  const Vector& diag() const { return diag_; }

 private:
  const SparseMatrix* A_;
  double omega_;
  Vector diag_;
};

/// The matrix must outlive the returned operator.
inline LinearOperator make_ssor_preconditioner(const SparseMatrix& A,
                                               double omega = 1.0) {
  auto sweeps = std::make_shared<SsorSweeps>(A, omega);
  return {A.rows(), A.rows(),
          [sweeps](const Vector& r, Vector& z) { z = sweeps->apply_inv(r); },
          "ssor"};
}

/// Bounds on the spectrum of P_ssor^{-1} A via Lanczos on E A E^T.
inline std::pair<double, double> estimate_ssor_spectrum(
    const SparseMatrix& A, double omega = 1.0, int probes = 30,
    unsigned seed = 1234u) {
  SsorSweeps sw(A, omega);
  const double g = std::sqrt((2.0 - omega) / omega);
  Vector dsqrt = sw.diag();
  for (double& v : dsqrt) v = std::sqrt(v);
  // E^T x = (D/w + U)^{-1} (g D^{1/2} x); E y = g D^{1/2} (D/w + L)^{-1} y.
  auto apply_B = [&](const Vector& x) {
    Vector t(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) t[i] = g * dsqrt[i] * x[i];
    Vector u = sw.backward(t);
    Vector v = spmv(A, u);
    Vector w = sw.forward(v);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] *= g * dsqrt[i];
    return w;
  };
  auto [lo, hi] = detail::lanczos_extremes(apply_B, A.rows(), probes, seed);
  if (lo < 0.0)
    throw NumericalError(
        "estimate_ssor_spectrum: negative Ritz value, matrix not positive "
        "definite");
  return {0.9 * lo, 1.1 * hi};
}

/// Preconditioned conjugate gradients. Used internally for mass solves at
/// setup time and for the mean-zero Laplacian potential in the energy; the
/// optional unit-norm nullspace vector keeps iterates in its orthogonal
/// complement.
inline KrylovResult conjugate_gradient(const LinearOperator& A,
                                       const LinearOperator& P_inv,
                                       const Vector& b, double rel_tol,
                                       int max_iter,
                                       const Vector* nullspace = nullptr) {
  require_finite(b, "cg rhs");
  const int n = A.rows();
  if (static_cast<int>(b.size()) != n)
    throw std::invalid_argument("cg: dimension mismatch");

  auto project = [&](Vector& v) {
    if (nullspace) axpy(-dot(v, *nullspace), *nullspace, v);
  };

  KrylovResult res;
  res.x.assign(static_cast<std::size_t>(n), 0.0);
  Vector r = b;
  project(r);
  const double norm_b = norm2(r);
  res.residual_norms.push_back(norm_b);
  if (norm_b == 0.0) {
    res.converged = true;
    return res;
  }
  const double target = rel_tol * norm_b;

  Vector z = P_inv(r);
  project(z);
  Vector p = z;
  double rz = dot(r, z);
  for (int it = 0; it < max_iter; ++it) {
    Vector Ap = A(p);
    const double pAp = dot(p, Ap);
    if (pAp <= 0.0)
      throw NumericalError("cg: operator not positive definite on iterate");
    const double alpha = rz / pAp;
    axpy(alpha, p, res.x);
    axpy(-alpha, Ap, r);
    project(r);
    ++res.iterations;
    const double rn = norm2(r);
    res.residual_norms.push_back(rn);
    if (rn <= target) {
      res.converged = true;
      break;
    }
    z = P_inv(r);
    project(z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
  }
  res.final_residual = res.residual_norms.back();
  return res;
}

}  // namespace okflow
