#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "okflow/dense.hpp"
#include "okflow/errors.hpp"

namespace okflow {

namespace detail {

/// Reduces A in place to upper Hessenberg form by Householder reflections.
inline void hessenberg_reduce(DenseMatrix& A) {
  const int n = A.rows();
  for (int k = 0; k < n - 2; ++k) {
    double scale = 0.0;
    for (int i = k + 1; i < n; ++i) scale += std::abs(A(i, k));
    if (scale == 0.0) continue;
    double h = 0.0;
    Vector v(static_cast<std::size_t>(n), 0.0);
    for (int i = k + 1; i < n; ++i) {
      v[i] = A(i, k) / scale;
      h += v[i] * v[i];
    }
    double g = std::sqrt(h);
    if (v[k + 1] > 0.0) g = -g;
    h -= v[k + 1] * g;
    v[k + 1] -= g;
    if (h == 0.0) continue;
    // A := (I - v v^T / h) A (I - v v^T / h)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = k + 1; i < n; ++i) s += v[i] * A(i, j);
      s /= h;
      for (int i = k + 1; i < n; ++i) A(i, j) -= s * v[i];
    }
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = k + 1; j < n; ++j) s += A(i, j) * v[j];
      s /= h;
      for (int j = k + 1; j < n; ++j) A(i, j) -= s * v[j];
    }
    A(k + 1, k) = scale * g;
    for (int i = k + 2; i < n; ++i) A(i, k) = 0.0;
  }
}

/// Francis double-shift QR on an upper Hessenberg matrix; returns all
/// eigenvalues. Follows the classical hqr deflation scheme with
/// exceptional shifts every ten stalled sweeps.
inline std::vector<std::complex<double>> hqr_eigenvalues(DenseMatrix& a) {
  const int n = a.rows();
  std::vector<std::complex<double>> out;
  out.reserve(static_cast<std::size_t>(n));

  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));
  if (anorm == 0.0) {
    out.assign(static_cast<std::size_t>(n), {0.0, 0.0});
    return out;
  }

  int nn = n - 1;
  double t = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l;
    do {
      for (l = nn; l >= 1; --l) {
        const double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        const double cmp = (s == 0.0) ? anorm : s;
        if (std::abs(a(l, l - 1)) + cmp == cmp) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      double x = a(nn, nn);
      if (l == nn) {
        out.push_back({x + t, 0.0});
        --nn;
      } else {
        double y = a(nn - 1, nn - 1);
        double w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          const double p = 0.5 * (y - x);
          const double q = p * p + w;
          const double z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            const double zz = p + (p >= 0.0 ? z : -z);
            out.push_back({x + zz, 0.0});
            out.push_back({zz != 0.0 ? x - w / zz : x + zz, 0.0});
          } else {
            out.push_back({x + p, z});
            out.push_back({x + p, -z});
          }
          nn -= 2;
        } else {
          if (its == 30)
            throw NumericalError("eigenvalue iteration failed to converge");
          double p = 0.0, q = 0.0, z = 0.0, r = 0.0, s = 0.0;
          if (its == 10 || its == 20) {
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            x = y = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m;
          for (m = nn - 2; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u =
                std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) +
                                            std::abs(z) +
                                            std::abs(a(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = (k != nn - 1) ? a(k + 2, k - 1) : 0.0;
              x = std::abs(p) + std::abs(q) + std::abs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            s = std::sqrt(p * p + q * q + r * r);
            if (p < 0.0) s = -s;
            if (s == 0.0) continue;
            if (k == m) {
              if (l != m) a(k, k - 1) = -a(k, k - 1);
            } else {
              a(k, k - 1) = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            z = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= nn; ++j) {
              p = a(k, j) + q * a(k + 1, j);
              if (k != nn - 1) {
                p += r * a(k + 2, j);
                a(k + 2, j) -= p * z;
              }
              a(k + 1, j) -= p * y;
              a(k, j) -= p * x;
            }
            const int mmin = (nn < k + 3) ? nn : k + 3;
            for (int i = l; i <= mmin; ++i) {
              p = x * a(i, k) + y * a(i, k + 1);
              if (k != nn - 1) {
                p += z * a(i, k + 2);
                a(i, k + 2) -= p * r;
              }
              a(i, k + 1) -= p * q;
              a(i, k) -= p;
            }
          }
        }
      }
    } while (l < nn - 1 && nn >= 0);
  }
  return out;
}

}  // namespace detail

/// All eigenvalues of a general square matrix, sorted by real part then
/// imaginary part.
inline std::vector<std::complex<double>> dense_eigenvalues(DenseMatrix A) {
  if (A.rows() != A.cols())
    throw std::invalid_argument("dense_eigenvalues: matrix not square");
  if (A.rows() == 0) return {};
  if (A.rows() == 1) return {{A(0, 0), 0.0}};
  detail::hessenberg_reduce(A);
  auto ev = detail::hqr_eigenvalues(A);
  std::sort(ev.begin(), ev.end(),
            [](const std::complex<double>& a, const std::complex<double>& b) {
              if (a.real() != b.real()) return a.real() < b.real();
              return a.imag() < b.imag();
            });
  return ev;
}

/// All eigenvalues of a symmetric matrix via cyclic Jacobi rotations,
/// sorted ascending. Input symmetry is trusted; only the upper triangle is
/// read.
inline std::vector<double> symmetric_eigenvalues(DenseMatrix A,
                                                 int max_sweeps = 60) {
  const int n = A.rows();
  if (n != A.cols())
    throw std::invalid_argument("symmetric_eigenvalues: matrix not square");
  double ref = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ref += A(i, j) * A(i, j);
  ref = std::sqrt(ref);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (std::sqrt(off) <= 1e-14 * ref + 1e-300) break;
    if (sweep == max_sweeps - 1)
      throw NumericalError("symmetric eigensolver failed to converge");
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double tau = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double tt = (tau >= 0.0)
                              ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                              : -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + tt * tt);
        const double s = tt * c;
        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p);
          const double akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k);
          const double aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ev[i] = A(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Extreme eigenvalues of the pencil (E, M) with M symmetric positive
/// definite: returns {min, max} of eig(M^{-1} E) via the congruent
/// symmetric problem L^{-1} E L^{-T} with M = L L^T.
inline std::pair<double, double> sym_generalized_extremes(
    const DenseMatrix& E, const DenseMatrix& M) {
  const int n = E.rows();
  if (n != E.cols() || n != M.rows() || n != M.cols())
    throw std::invalid_argument("sym_generalized_extremes: size mismatch");
  if (n > 2000)
    throw std::invalid_argument(
        "sym_generalized_extremes: problem too large for dense path");
  CholeskyFactor chol(M);
  // Columns of L^{-1} E L^{-T}: solve L Y = E, then L Z^T = Y^T.
  DenseMatrix Y(n, n);
  Vector col(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) col[i] = E(i, j);
    Vector y = chol.forward(col);
    for (int i = 0; i < n; ++i) Y(i, j) = y[i];
  }
  DenseMatrix T(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) col[j] = Y(i, j);
    Vector z = chol.forward(col);
    for (int j = 0; j < n; ++j) T(i, j) = z[j];
  }
  // Symmetrize away factorization round-off before the Jacobi sweep.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (T(i, j) + T(j, i));
      T(i, j) = v;
      T(j, i) = v;
    }
  auto ev = symmetric_eigenvalues(std::move(T));
  return {ev.front(), ev.back()};
}

}  // namespace okflow
