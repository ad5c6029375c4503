#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "okflow/errors.hpp"
#include "okflow/vec.hpp"

namespace okflow {

struct Triplet {
  int row = 0;
  int col = 0;
  double val = 0.0;
};

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row and duplicates are summed at construction, so every
/// operation on the stored pattern is deterministic.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  SparseMatrix(int nrows, int ncols, std::vector<int> row_ptr,
               std::vector<int> col_idx, std::vector<double> vals)
      : nrows_(nrows),
        ncols_(ncols),
        row_ptr_(std::move(row_ptr)),
        col_idx_(std::move(col_idx)),
        vals_(std::move(vals)) {
    check_layout();
  }

  static SparseMatrix from_triplets(int nrows, int ncols,
                                    std::vector<Triplet> ts) {
    if (nrows < 0 || ncols < 0)
      throw std::invalid_argument("from_triplets: negative dimension");
    std::stable_sort(ts.begin(), ts.end(),
                     [](const Triplet& a, const Triplet& b) {
                       return a.row != b.row ? a.row < b.row : a.col < b.col;
                     });
    SparseMatrix A;
    A.nrows_ = nrows;
    A.ncols_ = ncols;
    A.row_ptr_.assign(static_cast<std::size_t>(nrows) + 1, 0);
    A.col_idx_.reserve(ts.size());
    A.vals_.reserve(ts.size());
    std::size_t k = 0;
    for (int r = 0; r < nrows; ++r) {
      while (k < ts.size() && ts[k].row == r) {
        int c = ts[k].col;
        if (c < 0 || c >= ncols || ts[k].row < 0)
          throw std::invalid_argument("from_triplets: index out of range");
        double v = ts[k].val;
        ++k;
        while (k < ts.size() && ts[k].row == r && ts[k].col == c) {
          v += ts[k].val;  // duplicates summed in insertion order
          ++k;
        }
        A.col_idx_.push_back(c);
        A.vals_.push_back(v);
      }
      A.row_ptr_[static_cast<std::size_t>(r) + 1] =
          static_cast<int>(A.col_idx_.size());
    }
    if (k != ts.size())
      throw std::invalid_argument("from_triplets: row index out of range");
    return A;
  }

  static SparseMatrix identity(int n) {
    std::vector<Triplet> ts;
    ts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ts.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(ts));
  }

  int rows() const { return nrows_; }
  int cols() const { return ncols_; }
  std::size_t nnz() const { return vals_.size(); }

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return vals_; }
  std::vector<double>& values() { return vals_; }

  Vector diagonal() const {
    Vector d(static_cast<std::size_t>(std::min(nrows_, ncols_)), 0.0);
    for (int i = 0; i < static_cast<int>(d.size()); ++i) {
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
        if (col_idx_[k] == i) d[i] = vals_[k];
    }
    return d;
  }

  bool symmetric() const { return symmetric_; }

  /// Validates ||A - A^T||_max <= rtol * max|A| and records the flag.
  void mark_symmetric(double rtol = 1e-13);

  double entry(int i, int j) const {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (col_idx_[k] == j) return vals_[k];
    return 0.0;
  }

 private:
  void check_layout() const {
    if (static_cast<int>(row_ptr_.size()) != nrows_ + 1)
      throw std::invalid_argument("SparseMatrix: bad row_ptr length");
    if (col_idx_.size() != vals_.size())
      throw std::invalid_argument("SparseMatrix: col/val length mismatch");
    for (int r = 0; r < nrows_; ++r) {
      if (row_ptr_[r] > row_ptr_[r + 1])
        throw std::invalid_argument("SparseMatrix: row_ptr not monotone");
      for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        if (col_idx_[k] < 0 || col_idx_[k] >= ncols_)
          throw std::invalid_argument("SparseMatrix: column out of range");
        if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1])
          throw std::invalid_argument(
              "SparseMatrix: columns not strictly increasing");
      }
    }
  }

  int nrows_ = 0;
  int ncols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> vals_;
  bool symmetric_ = false;
};

/// y := A x, accumulated left-to-right per row.
inline void spmv(const SparseMatrix& A, const Vector& x, Vector& y) {
  if (static_cast<int>(x.size()) != A.cols())
    throw std::invalid_argument("spmv: dimension mismatch");
  y.assign(static_cast<std::size_t>(A.rows()), 0.0);
  const auto& rp = A.row_ptr();
  const auto& ci = A.col_idx();
  const auto& v = A.values();
  for (int i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (int k = rp[i]; k < rp[i + 1]; ++k) s += v[k] * x[ci[k]];
    y[i] = s;
  }
}

inline Vector spmv(const SparseMatrix& A, const Vector& x) {
  Vector y;
  spmv(A, x, y);
  return y;
}

/// y := A^T x without forming the transpose.
inline Vector spmv_transpose(const SparseMatrix& A, const Vector& x) {
  if (static_cast<int>(x.size()) != A.rows())
    throw std::invalid_argument("spmv_transpose: dimension mismatch");
  Vector y(static_cast<std::size_t>(A.cols()), 0.0);
  const auto& rp = A.row_ptr();
  const auto& ci = A.col_idx();
  const auto& v = A.values();
  for (int i = 0; i < A.rows(); ++i)
    for (int k = rp[i]; k < rp[i + 1]; ++k) y[ci[k]] += v[k] * x[i];
  return y;
}

inline SparseMatrix transpose(const SparseMatrix& A) {
  std::vector<Triplet> ts;
  ts.reserve(A.nnz());
  const auto& rp = A.row_ptr();
  const auto& ci = A.col_idx();
  const auto& v = A.values();
  for (int i = 0; i < A.rows(); ++i)
    for (int k = rp[i]; k < rp[i + 1]; ++k) ts.push_back({ci[k], i, v[k]});
  return SparseMatrix::from_triplets(A.cols(), A.rows(), std::move(ts));
}

/// A + alpha * B on the union pattern.
inline SparseMatrix add(const SparseMatrix& A, double alpha,
                        const SparseMatrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw std::invalid_argument("add: dimension mismatch");
  std::vector<Triplet> ts;
  ts.reserve(A.nnz() + B.nnz());
  for (int i = 0; i < A.rows(); ++i)
    for (int k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k)
      ts.push_back({i, A.col_idx()[k], A.values()[k]});
  for (int i = 0; i < B.rows(); ++i)
    for (int k = B.row_ptr()[i]; k < B.row_ptr()[i + 1]; ++k)
      ts.push_back({i, B.col_idx()[k], alpha * B.values()[k]});
  return SparseMatrix::from_triplets(A.rows(), A.cols(), std::move(ts));
}

inline SparseMatrix scale(const SparseMatrix& A, double alpha) {
  SparseMatrix B = A;
  for (double& v : B.values()) v *= alpha;
  return B;
}

inline SparseMatrix matmul(const SparseMatrix& A, const SparseMatrix& B) {
  if (A.cols() != B.rows())
    throw std::invalid_argument("matmul: dimension mismatch");
  std::vector<Triplet> ts;
  std::vector<double> acc(static_cast<std::size_t>(B.cols()), 0.0);
  std::vector<int> touched;
  for (int i = 0; i < A.rows(); ++i) {
    touched.clear();
    for (int ka = A.row_ptr()[i]; ka < A.row_ptr()[i + 1]; ++ka) {
      const int j = A.col_idx()[ka];
      const double av = A.values()[ka];
      for (int kb = B.row_ptr()[j]; kb < B.row_ptr()[j + 1]; ++kb) {
        const int c = B.col_idx()[kb];
        if (acc[c] == 0.0 &&
            std::find(touched.begin(), touched.end(), c) == touched.end())
          touched.push_back(c);
        acc[c] += av * B.values()[kb];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (int c : touched) {
      ts.push_back({i, c, acc[c]});
      acc[c] = 0.0;
    }
  }
  return SparseMatrix::from_triplets(A.rows(), B.cols(), std::move(ts));
}

inline double max_abs(const SparseMatrix& A) {
  double m = 0.0;
  for (double v : A.values()) m = std::max(m, std::abs(v));
  return m;
}

inline void SparseMatrix::mark_symmetric(double rtol) {
  if (nrows_ != ncols_)
    throw std::invalid_argument("mark_symmetric: matrix not square");
  const SparseMatrix At = transpose(*this);
  double diff = 0.0;
  const SparseMatrix D = add(*this, -1.0, At);
  for (double v : D.values()) diff = std::max(diff, std::abs(v));
  if (diff > rtol * std::max(max_abs(*this), 1e-300))
    throw NumericalError("mark_symmetric: asymmetry above tolerance");
  symmetric_ = true;
}

}  // namespace okflow
