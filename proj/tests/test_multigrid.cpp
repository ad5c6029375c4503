#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "okflow/assembly.hpp"
#include "okflow/krylov.hpp"
#include "okflow/mesh.hpp"
#include "okflow/multigrid.hpp"

using namespace okflow;

namespace {

Vector random_vector(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(static_cast<std::size_t>(n));
  for (double& x : v) x = dist(rng);
  return v;
}

/// Shat coefficient for the reference parameter set eps=0.02, dt=eps^2,
/// theta=0.5, sigma=100: eps*sqrt(dt*theta/(1+dt*theta*sigma)).
double reference_eps_sqrt_c() {
  const double eps = 0.02, theta = 0.5, sigma = 100.0;
  const double dt = eps * eps;
  const double c = dt * theta / (1.0 + dt * theta * sigma);
  return eps * std::sqrt(c);
}

}  // namespace

TEST_CASE("hierarchy for a 64-grid stops after four halvings") {
  const StructuredMesh m = build_mesh(2, 64);
  const OperatorSet ops = assemble_operators(m);
  const MGHierarchy h =
      build_hierarchy(m, ops.M, ops.K, reference_eps_sqrt_c(), 100);
  REQUIRE(h.levels() == 4);
  REQUIRE(h.ops[0].rows() == 65 * 65);
  REQUIRE(h.ops[1].rows() == 33 * 33);
  REQUIRE(h.ops[2].rows() == 17 * 17);
  REQUIRE(h.ops[3].rows() == 9 * 9);
}

TEST_CASE("pure mass hierarchy converges in a handful of cycles") {
  std::mt19937 rng(4001);
  const StructuredMesh m = build_mesh(2, 16);
  const OperatorSet ops = assemble_operators(m);
  const MGHierarchy h = build_hierarchy(m, ops.M, ops.K, 0.0, 60);
  const Vector b = random_vector(m.num_vertices(), rng);
  // Measured per-cycle contraction is about 0.21, so eight cycles leave a
  // relative residual near 4e-6; the bound below checks bounded-cycle
  // convergence without hugging the measurement.
  const Vector x = apply_shat_inv(h, b, 8);
  Vector r = b;
  const Vector Mx = spmv(ops.M, x);
  axpy(-1.0, Mx, r);
  REQUIRE(norm2(r) <= 1e-4 * norm2(b));
}

TEST_CASE("galerkin coarse operator equals rediscretization on the coarse mesh") {
  const StructuredMesh fine = build_mesh(2, 8);
  const OperatorSet fops = assemble_operators(fine);
  const double esc = reference_eps_sqrt_c();
  const MGHierarchy h = build_hierarchy(fine, fops.M, fops.K, esc, 40);
  REQUIRE(h.levels() >= 2);

  // Triple product, recomputed explicitly.
  const SparseMatrix P = prolongation(coarsen(fine), fine);
  const SparseMatrix triple =
      matmul(transpose(P), matmul(add(fops.M, esc, fops.K), P));
  const SparseMatrix d1 = add(h.ops[1], -1.0, triple);
  REQUIRE(max_abs(d1) <= 1e-12 * max_abs(triple));

  // Independent oracle: on nested P1 spaces the Galerkin product equals
  // assembling the same operator on the coarse mesh directly.
  const StructuredMesh coarse = coarsen(fine);
  const OperatorSet cops = assemble_operators(coarse);
  const SparseMatrix redisc = add(cops.M, esc, cops.K);
  const SparseMatrix d2 = add(h.ops[1], -1.0, redisc);
  REQUIRE(max_abs(d2) <= 1e-12 * max_abs(redisc));
}

TEST_CASE("every level operator is spd on random probes") {
  std::mt19937 rng(4003);
  const StructuredMesh m = build_mesh(3, 4);
  const OperatorSet ops = assemble_operators(m);
  const MGHierarchy h =
      build_hierarchy(m, ops.M, ops.K, reference_eps_sqrt_c(), 30);
  REQUIRE(h.levels() >= 2);
  for (int l = 0; l < h.levels(); ++l) {
    for (int t = 0; t < 5; ++t) {
      Vector v = random_vector(h.ops[l].rows(), rng);
      REQUIRE(dot(v, spmv(h.ops[l], v)) > 0.0);
    }
  }
}

TEST_CASE("v-cycle maps zero to zero") {
  const StructuredMesh m = build_mesh(2, 8);
  const OperatorSet ops = assemble_operators(m);
  const MGHierarchy h =
      build_hierarchy(m, ops.M, ops.K, reference_eps_sqrt_c(), 40);
  const Vector zero(static_cast<std::size_t>(m.num_vertices()), 0.0);
  const Vector x = v_cycle(h, zero, 2, 2);
  REQUIRE(norm_inf(x) == 0.0);
}

TEST_CASE("one v(2,2) cycle halves the error in the operator norm") {
  std::mt19937 rng(4007);
  const StructuredMesh m = build_mesh(2, 64);
  const OperatorSet ops = assemble_operators(m);
  const MGHierarchy h =
      build_hierarchy(m, ops.M, ops.K, reference_eps_sqrt_c(), 500);

  const SparseMatrix& S = h.ops.front();
  for (int t = 0; t < 3; ++t) {
    const Vector y = random_vector(m.num_vertices(), rng);  // exact solution
    const Vector b = spmv(S, y);
    const Vector x = v_cycle(h, b, 2, 2);
    Vector e = y;
    axpy(-1.0, x, e);
    const double after = std::sqrt(dot(e, spmv(S, e)));
    const double before = std::sqrt(dot(y, spmv(S, y)));
    REQUIRE(after <= 0.5 * before);
  }
}

TEST_CASE("composed cycles equal an explicit richardson composition") {
  std::mt19937 rng(4011);
  const StructuredMesh m = build_mesh(2, 16);
  const OperatorSet ops = assemble_operators(m);
  const MGHierarchy h =
      build_hierarchy(m, ops.M, ops.K, reference_eps_sqrt_c(), 60);
  const Vector b = random_vector(m.num_vertices(), rng);

  const LinearOperator S_op = make_matrix_operator(h.ops.front());
  const LinearOperator cycle_op{
      h.fine_size(), h.fine_size(),
      [&h](const Vector& r, Vector& z) { z = v_cycle(h, r, 2, 2); },
      "v-cycle"};
  for (int k : {1, 3}) {
    const Vector a = apply_shat_inv(h, b, k);
    const Vector r = richardson(S_op, cycle_op, b, k);
    for (std::size_t i = 0; i < a.size(); ++i)
      REQUIRE(a[i] == Catch::Approx(r[i]).margin(1e-15));
  }
  const Vector one_cycle = v_cycle(h, b, 2, 2);
  const Vector one_apply = apply_shat_inv(h, b, 1);
  REQUIRE(one_cycle == one_apply);
}

TEST_CASE("five cycles reach the inner tolerance on a 32-grid") {
  std::mt19937 rng(4013);
  const StructuredMesh m = build_mesh(2, 32);
  const OperatorSet ops = assemble_operators(m);
  const MGHierarchy h =
      build_hierarchy(m, ops.M, ops.K, reference_eps_sqrt_c(), 500);
  const Vector b = random_vector(m.num_vertices(), rng);
  const Vector x = apply_shat_inv(h, b, 5);
  Vector r = b;
  const Vector Sx = spmv(h.ops.front(), x);
  axpy(-1.0, Sx, r);
  REQUIRE(norm2(r) <= 1e-3 * norm2(b));
}

TEST_CASE("the composed solve is linear in its input") {
  std::mt19937 rng(4017);
  const StructuredMesh m = build_mesh(2, 8);
  const OperatorSet ops = assemble_operators(m);
  const MGHierarchy h =
      build_hierarchy(m, ops.M, ops.K, reference_eps_sqrt_c(), 40);
  const Vector b = random_vector(m.num_vertices(), rng);
  const Vector x1 = apply_shat_inv(h, b, 3);
  const Vector x2 = apply_shat_inv(h, scaled(b, -2.5), 3);
  for (std::size_t i = 0; i < b.size(); ++i)
    REQUIRE(x2[i] == Catch::Approx(-2.5 * x1[i]).margin(1e-13));
}

TEST_CASE("single-level hierarchy is a direct solve") {
  std::mt19937 rng(4019);
  const StructuredMesh m = build_mesh(2, 5);
  const OperatorSet ops = assemble_operators(m);
  const MGHierarchy h = build_hierarchy(m, ops.M, ops.K,
                                        reference_eps_sqrt_c(), 10000);
  REQUIRE(h.levels() == 1);
  const Vector b = random_vector(m.num_vertices(), rng);
  const Vector x = v_cycle(h, b, 2, 2);
  Vector r = b;
  const Vector Sx = spmv(h.ops.front(), x);
  axpy(-1.0, Sx, r);
  REQUIRE(norm2(r) <= 1e-12 * norm2(b));
}

TEST_CASE("an odd grid too large for the direct solver is rejected") {
  const StructuredMesh m = build_mesh(2, 45);  // 2116 vertices, no halving
  const OperatorSet ops = assemble_operators(m);
  REQUIRE_THROWS_AS(
      build_hierarchy(m, ops.M, ops.K, reference_eps_sqrt_c(), 500),
      ConfigError);
}

TEST_CASE("build counter increments once per construction") {
  const StructuredMesh m = build_mesh(2, 4);
  const OperatorSet ops = assemble_operators(m);
  const long before = g_hierarchy_builds.load();
  const MGHierarchy h = build_hierarchy(m, ops.M, ops.K, 0.1, 10);
  REQUIRE(g_hierarchy_builds.load() == before + 1);
}
