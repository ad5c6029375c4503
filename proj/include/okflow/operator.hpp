#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "okflow/sparse.hpp"
#include "okflow/vec.hpp"

namespace okflow {

/// Square-or-rectangular linear map with an apply contract y := Op(x).
/// Wraps explicit matrices, preconditioner actions, and compositions behind
/// one interface so solvers never care which they were handed.
struct LinearOperator {
  int n = 0;  // output dimension; input dimension is n_in (defaults to n)
  int n_in = 0;
  std::function<void(const Vector&, Vector&)> apply_fn;
  std::string label;

  void apply(const Vector& x, Vector& y) const {
    if (static_cast<int>(x.size()) != cols())
      throw std::invalid_argument("operator '" + label +
                                  "': input dimension mismatch");
    apply_fn(x, y);
  }

  Vector operator()(const Vector& x) const {
    Vector y;
    apply(x, y);
    return y;
  }

  int rows() const { return n; }
  int cols() const { return n_in > 0 ? n_in : n; }
};

inline LinearOperator make_identity_operator(int n) {
  return {n, n, [](const Vector& x, Vector& y) { y = x; }, "identity"};
}

/// The matrix must outlive the returned operator.
inline LinearOperator make_matrix_operator(const SparseMatrix& A,
                                           std::string label = "matrix") {
  const SparseMatrix* Ap = &A;
  return {A.rows(), A.cols(),
          [Ap](const Vector& x, Vector& y) { spmv(*Ap, x, y); },
          std::move(label)};
}

/// Jacobi preconditioner action z = diag(A)^{-1} r.
inline LinearOperator make_jacobi_preconditioner(const SparseMatrix& A) {
  Vector d = A.diagonal();
  for (double v : d)
    if (v == 0.0)
      throw std::invalid_argument("jacobi preconditioner: zero diagonal");
  return {A.rows(), A.rows(),
          [d = std::move(d)](const Vector& r, Vector& z) {
            z.resize(r.size());
            for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / d[i];
          },
          "jacobi"};
}

}  // namespace okflow
