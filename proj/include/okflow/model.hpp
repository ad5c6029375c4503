#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "okflow/assembly.hpp"
#include "okflow/errors.hpp"
#include "okflow/krylov.hpp"
#include "okflow/mesh.hpp"
#include "okflow/operator.hpp"
#include "okflow/params.hpp"
#include "okflow/precond.hpp"
#include "okflow/sparse.hpp"
#include "okflow/vec.hpp"

namespace okflow {

/// Nodal phase field u, chemical potential w, and the time level they live
/// on. Both vectors are indexed like mesh vertices.
struct State {
  Vector u, w;
  double t = 0.0;
  int step = 0;
};

/// Per-timestep solver record.
struct IterationStats {
  int step = 0;
  double t = 0.0;
  int newton_iters = 0;
  std::vector<int> gmres_iters;  // one entry per Newton iteration
  double residual_norm = 0.0;    // final stacked nonlinear residual
  double mass = 0.0;             // b^T u at the new level
  double energy = 0.0;
  double seconds = 0.0;  // wall-clock time of the nonlinear solve
  bool converged = true;
};

/// Integral of the phase field: b^T u = ∫ u_h dx, which equals its mean on
/// the unit box.
inline double total_mass(const OperatorSet& ops, const Vector& u) {
  return dot(ops.b, u);
}

/// Free energy
///   E[u] = (eps^2/2) u^T K u + (1/4)∫(1-u_h^2)^2 dx + (sigma/2) phi^T (Mu - m b),
/// where K phi = Mu - m b with mean-zero phi realizes the inverse Laplacian
/// acting on the deviation from the prescribed mean. The right-hand side must
/// itself be mean zero (compatibility of the pure-Neumann solve); violations
/// beyond 1e-6 are rejected.
inline double energy(const StructuredMesh& mesh, const OperatorSet& ops,
                     const Vector& u, const SolverConfig& cfg) {
  if (static_cast<int>(u.size()) != mesh.num_vertices())
    throw std::invalid_argument("energy: vector length mismatch");
  const double grad_term = 0.5 * cfg.eps * cfg.eps * dot(u, spmv(ops.K, u));
  const double well_term = 0.25 * integrate_double_well(mesh, u);

  double nonlocal_term = 0.0;
  if (cfg.sigma != 0.0) {
    Vector rhs = spmv(ops.M, u);
    axpy(-cfg.m, ops.b, rhs);
    double mean = 0.0;
    for (double v : rhs) mean += v;
    if (std::abs(mean) > 1e-6)
      throw InconsistentState(
          "energy: potential right-hand side is not mean-zero (|sum| = " +
          std::to_string(std::abs(mean)) + ")");

    const int n = static_cast<int>(u.size());
    Vector ones(static_cast<std::size_t>(n),
                1.0 / std::sqrt(static_cast<double>(n)));
    const LinearOperator K_op = make_matrix_operator(ops.K, "stiffness");
    const LinearOperator P_inv = make_jacobi_preconditioner(ops.K);
    const KrylovResult sol =
        conjugate_gradient(K_op, P_inv, rhs, 1e-10, 2000, &ones);
    if (!sol.converged)
      throw NumericalError("energy: potential solve did not converge");
    nonlocal_term = 0.5 * cfg.sigma * dot(sol.x, rhs);
  }
  return grad_term + well_term + nonlocal_term;
}

/// Initial pair: u0 interpolates m plus the separable cosine bump
/// p(x) = Π cos(2π x_i)/50 (which has zero integral and zero normal
/// derivative on the box boundary), and w0 solves the constraint equation
/// M w0 = eps^2 K u0 + N(u0) to tight tolerance so that initialization error
/// cannot pollute iteration-count measurements.
inline State initial_state(const StructuredMesh& mesh, const OperatorSet& ops,
                           const SolverConfig& cfg) {
  constexpr double kPi = 3.14159265358979323846;
  State s;
  s.u = interpolate(mesh, [&cfg](double x, double y, double z) {
    return cfg.m + std::cos(2.0 * kPi * x) * std::cos(2.0 * kPi * y) *
                       std::cos(2.0 * kPi * z) / 50.0;
  });
  Vector rhs = spmv(ops.K, s.u);
  scal(cfg.eps * cfg.eps, rhs);
  axpy(1.0, assemble_nonlinear(mesh, s.u), rhs);

  const LinearOperator M_op = make_matrix_operator(ops.M, "mass");
  const LinearOperator P_inv = make_jacobi_preconditioner(ops.M);
  const KrylovResult sol = conjugate_gradient(M_op, P_inv, rhs, 1e-12, 1000);
  if (!sol.converged)
    throw NumericalError("initial_state: mass solve did not converge");
  s.w = sol.x;
  s.t = 0.0;
  s.step = 0;
  return s;
}

/// Nonlinear residual of one implicit step from `old` to `next`:
///   R1 = M(u+ - u) + dt[theta(K w+ + sigma(M u+ - m b))
///                      + (1-theta)(K w + sigma(M u - m b))]
///   R2 = M w+ - eps^2 K u+ - N(u+)
/// The constraint equation is enforced at the new level only.
inline std::pair<Vector, Vector> residual(const State& next, const State& old,
                                          const StructuredMesh& mesh,
                                          const OperatorSet& ops,
                                          const SolverConfig& cfg) {
  if (next.u.size() != old.u.size() || next.w.size() != old.w.size() ||
      static_cast<int>(next.u.size()) != mesh.num_vertices())
    throw std::invalid_argument("residual: states do not match the mesh");

  auto flux = [&](const Vector& u, const Vector& w) {
    Vector f = spmv(ops.K, w);
    Vector mu = spmv(ops.M, u);
    axpy(-cfg.m, ops.b, mu);
    axpy(cfg.sigma, mu, f);
    return f;  // K w + sigma (M u - m b)
  };

  Vector du = next.u;
  axpy(-1.0, old.u, du);
  Vector r1 = spmv(ops.M, du);
  axpy(cfg.dt * cfg.theta, flux(next.u, next.w), r1);
  axpy(cfg.dt * (1.0 - cfg.theta), flux(old.u, old.w), r1);

  Vector r2 = spmv(ops.M, next.w);
  Vector ku = spmv(ops.K, next.u);
  axpy(-cfg.eps * cfg.eps, ku, r2);
  axpy(-1.0, assemble_nonlinear(mesh, next.u), r2);
  return {std::move(r1), std::move(r2)};
}

namespace detail {

inline double stacked_norm(const std::pair<Vector, Vector>& r) {
  const double a = norm2(r.first), b = norm2(r.second);
  return std::sqrt(a * a + b * b);
}

}  // namespace detail

/// One implicit step by Newton's method with the block-preconditioned Krylov
/// solver on each linear system. The convergence test runs before the first
/// solve, so a start at the exact solution costs zero iterations. The
/// linearized double-well block is reassembled every Newton iteration; the
/// context's shifted-operator hierarchy is never touched. Non-convergence is
/// reported through the stats record, not thrown.
inline std::pair<State, IterationStats> newton_solve(
    const State& old, const StructuredMesh& mesh, const OperatorSet& ops,
    SchurContext& ctx, const SolverConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  State next = old;
  next.t = old.t + cfg.dt;
  next.step = old.step + 1;

  IterationStats stats;
  stats.step = next.step;
  stats.t = next.t;

  const int n = mesh.num_vertices();
  double rnorm = detail::stacked_norm(residual(next, old, mesh, ops, cfg));
  const double ref = std::max(1.0, rnorm);
  bool done = rnorm <= cfg.newton_tol * ref;

  SparseMatrix me;
  while (!done && stats.newton_iters < cfg.newton_maxit) {
    me = assemble_coefficient_mass(mesh, next.u);
    ctx.Me = &me;

    auto [r1, r2] = residual(next, old, mesh, ops, cfg);
    Vector rhs(2 * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) rhs[static_cast<std::size_t>(i)] = -r1[i];
    for (int i = 0; i < n; ++i) rhs[static_cast<std::size_t>(n + i)] = -r2[i];

    const KrylovResult lin =
        gmres(jacobian_operator(ctx), block_preconditioner(ctx), rhs,
              cfg.gmres_tol, cfg.gmres_maxit, cfg.gmres_restart);
    stats.gmres_iters.push_back(lin.iterations);
    require_finite(lin.x, "newton update");

    for (int i = 0; i < n; ++i) next.u[static_cast<std::size_t>(i)] +=
        lin.x[static_cast<std::size_t>(i)];
    for (int i = 0; i < n; ++i) next.w[static_cast<std::size_t>(i)] +=
        lin.x[static_cast<std::size_t>(n + i)];
    ++stats.newton_iters;

    rnorm = detail::stacked_norm(residual(next, old, mesh, ops, cfg));
    done = rnorm <= cfg.newton_tol * ref;
  }
  ctx.Me = nullptr;

  stats.residual_norm = rnorm;
  stats.converged = done;
  stats.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
  return {std::move(next), std::move(stats)};
}

/// One step plus diagnostics (mass and energy of the new state).
inline std::pair<State, IterationStats> advance(const State& state,
                                                const StructuredMesh& mesh,
                                                const OperatorSet& ops,
                                                SchurContext& ctx,
                                                const SolverConfig& cfg) {
  auto [next, stats] = newton_solve(state, mesh, ops, ctx, cfg);
  stats.mass = total_mass(ops, next.u);
  stats.energy = energy(mesh, ops, next.u, cfg);
  return {std::move(next), std::move(stats)};
}

/// Mesh, per-step records (index 0 = initial state), and the final fields of
/// one complete run.
struct SimulationResult {
  StructuredMesh mesh;
  std::vector<IterationStats> stats;
  State final_state;
};

/// Full simulation: build mesh and operators, set up the preconditioner
/// context once, then advance n_steps times. `on_state` (when given) observes
/// the initial state and every accepted step, in order; `on_stats` observes
/// every stats record as it is produced — including the record of a failed
/// step, so streamed outputs survive an aborted run. A failed nonlinear
/// solve aborts the run.
inline SimulationResult run_simulation(
    const SolverConfig& cfg,
    const std::function<void(const StructuredMesh&, const State&)>& on_state =
        {},
    double shat_perturb = 0.0,
    const std::function<void(const IterationStats&)>& on_stats = {}) {
  cfg.validate();
  SimulationResult result;
  result.mesh = build_mesh(cfg.dim, cfg.n);
  const StructuredMesh& mesh = result.mesh;
  const OperatorSet ops = assemble_operators(mesh);
  SchurContext ctx = make_schur_context(mesh, ops.M, ops.K, cfg, shat_perturb);

  State state = initial_state(mesh, ops, cfg);
  IterationStats init;
  init.step = 0;
  init.t = 0.0;
  init.mass = total_mass(ops, state.u);
  init.energy = energy(mesh, ops, state.u, cfg);
  result.stats.push_back(init);
  if (on_stats) on_stats(init);
  if (on_state) on_state(mesh, state);

  for (int k = 0; k < cfg.n_steps; ++k) {
    auto [next, stats] = advance(state, mesh, ops, ctx, cfg);
    result.stats.push_back(stats);
    if (on_stats) on_stats(stats);
    if (!stats.converged)
      throw NumericalError("run_simulation: nonlinear solve failed at step " +
                           std::to_string(stats.step) + " (residual " +
                           std::to_string(stats.residual_norm) + ")");
    state = std::move(next);
    if (on_state) on_state(mesh, state);
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace okflow
