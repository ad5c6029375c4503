#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "okflow/errors.hpp"
#include "okflow/sparse.hpp"
#include "okflow/vec.hpp"

namespace okflow {

/// Row-major dense matrix used for coarse-grid solves and eigenvalue
/// verification. Sizes stay in the low thousands, so plain O(n^3)
/// factorizations are fine.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int nrows, int ncols, double fill = 0.0)
      : nrows_(nrows),
        ncols_(ncols),
        data_(static_cast<std::size_t>(nrows) * ncols, fill) {}

  int rows() const { return nrows_; }
  int cols() const { return ncols_; }

  double& operator()(int i, int j) {
    return data_[static_cast<std::size_t>(i) * ncols_ + j];
  }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * ncols_ + j];
  }

  const std::vector<double>& data() const { return data_; }

  static DenseMatrix identity(int n) {
    DenseMatrix I(n, n);
    for (int i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

 private:
  int nrows_ = 0;
  int ncols_ = 0;
  std::vector<double> data_;
};

inline DenseMatrix dense_from(const SparseMatrix& A) {
  DenseMatrix D(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k)
      D(i, A.col_idx()[k]) = A.values()[k];
  return D;
}

inline DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.cols() != B.rows())
    throw std::invalid_argument("dense matmul: dimension mismatch");
  DenseMatrix C(A.rows(), B.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int k = 0; k < A.cols(); ++k) {
      const double a = A(i, k);
      if (a == 0.0) continue;
      for (int j = 0; j < B.cols(); ++j) C(i, j) += a * B(k, j);
    }
  return C;
}

inline Vector matvec(const DenseMatrix& A, const Vector& x) {
  if (static_cast<int>(x.size()) != A.cols())
    throw std::invalid_argument("dense matvec: dimension mismatch");
  Vector y(static_cast<std::size_t>(A.rows()), 0.0);
  for (int i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < A.cols(); ++j) s += A(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline DenseMatrix transpose(const DenseMatrix& A) {
  DenseMatrix T(A.cols(), A.rows());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) T(j, i) = A(i, j);
  return T;
}

inline double max_abs(const DenseMatrix& A) {
  double m = 0.0;
  for (double v : A.data()) m = std::max(m, std::abs(v));
  return m;
}

/// LU factorization with partial pivoting, stored in place.
class LUFactor {
 public:
  explicit LUFactor(DenseMatrix A) : lu_(std::move(A)) {
    const int n = lu_.rows();
    if (n != lu_.cols()) throw std::invalid_argument("LU: matrix not square");
    perm_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm_[i] = i;
    for (int k = 0; k < n; ++k) {
      int p = k;
      double best = std::abs(lu_(k, k));
      for (int i = k + 1; i < n; ++i) {
        const double a = std::abs(lu_(i, k));
        if (a > best) {
          best = a;
          p = i;
        }
      }
      if (best == 0.0) throw NumericalError("LU: matrix is singular");
      if (p != k) {
        for (int j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
        std::swap(perm_[k], perm_[p]);
        sign_ = -sign_;
      }
      const double piv = lu_(k, k);
      for (int i = k + 1; i < n; ++i) {
        const double m = lu_(i, k) / piv;
        lu_(i, k) = m;
        for (int j = k + 1; j < n; ++j) lu_(i, j) -= m * lu_(k, j);
      }
    }
  }

  Vector solve(const Vector& b) const {
    const int n = lu_.rows();
    if (static_cast<int>(b.size()) != n)
      throw std::invalid_argument("LU solve: dimension mismatch");
    Vector x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (int i = 1; i < n; ++i) {
      double s = x[i];
      for (int j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
      x[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = x[i];
      for (int j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
      x[i] = s / lu_(i, i);
    }
    return x;
  }

  double determinant() const {
    double d = sign_;
    for (int i = 0; i < lu_.rows(); ++i) d *= lu_(i, i);
    return d;
  }

 private:
  DenseMatrix lu_;
  std::vector<int> perm_;
  double sign_ = 1.0;
};

inline DenseMatrix inverse(const DenseMatrix& A) {
  const int n = A.rows();
  LUFactor lu(A);
  DenseMatrix inv(n, n);
  Vector e(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vector col = lu.solve(e);
    e[j] = 0.0;
    for (int i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

/// Cholesky factorization A = L L^T for symmetric positive definite input.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const DenseMatrix& A) : l_(A.rows(), A.rows()) {
    const int n = A.rows();
    if (n != A.cols())
      throw std::invalid_argument("Cholesky: matrix not square");
    for (int j = 0; j < n; ++j) {
      double d = A(j, j);
      for (int k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (d <= 0.0 || !std::isfinite(d))
        throw NumericalError("Cholesky: matrix not positive definite");
      l_(j, j) = std::sqrt(d);
      for (int i = j + 1; i < n; ++i) {
        double s = A(i, j);
        for (int k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
        l_(i, j) = s / l_(j, j);
      }
    }
  }

  const DenseMatrix& lower() const { return l_; }

  Vector solve(const Vector& b) const {
    Vector y = forward(b);
    return backward(y);
  }

  /// Solves L y = b.
  Vector forward(const Vector& b) const {
    const int n = l_.rows();
    if (static_cast<int>(b.size()) != n)
      throw std::invalid_argument("Cholesky solve: dimension mismatch");
    Vector y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double s = b[i];
      for (int j = 0; j < i; ++j) s -= l_(i, j) * y[j];
      y[i] = s / l_(i, i);
    }
    return y;
  }

  /// Solves L^T x = y.
  Vector backward(const Vector& y) const {
    const int n = l_.rows();
    Vector x(static_cast<std::size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
      double s = y[i];
      for (int j = i + 1; j < n; ++j) s -= l_(j, i) * x[j];
      x[i] = s / l_(i, i);
    }
    return x;
  }

 private:
  DenseMatrix l_;
};

}  // namespace okflow
