#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "okflow/errors.hpp"

namespace okflow {

/// Every knob for one coupled phase-field simulation: model constants, time
/// stepping, mesh resolution, and the nested solver budgets. Defaults are the
/// standard desk-scale 2D configuration; studies override individual fields.
struct SolverConfig {
  // Model constants.
  double eps = 0.02;     // interfacial thickness
  double sigma = 100.0;  // strength of the long-range coupling
  double m = 0.4;        // prescribed spatial mean of the phase field
  double theta = 0.5;    // implicitness of the time discretization, in (0, 1]

  // Time stepping.
  double dt = 4.0e-4;  // timestep; eps^2 is the recommended scaling
  int n_steps = 25;

  // Mesh.
  int dim = 2;  // 2 or 3
  int n = 64;   // cells per coordinate direction of the unit box

  // Newton iteration.
  double newton_tol = 1e-8;  // relative to max(1, initial residual norm)
  int newton_maxit = 20;

  // Outer GMRES on the Jacobian system.
  double gmres_tol = 1e-6;
  int gmres_maxit = 200;
  int gmres_restart = 0;  // 0 = full (unrestarted) GMRES

  // Inner solves used by the block preconditioner.
  int cheby_iters = 10;                  // Chebyshev steps per mass solve
  std::string cheby_precond = "jacobi";  // "jacobi" or "ssor"
  int richardson_steps = 2;    // refinement steps on the Schur system
  int mg_cycles = 5;           // V-cycles per shifted-operator solve
  int mg_pre = 2;              // pre-smoothing sweeps per cycle
  int mg_post = 2;             // post-smoothing sweeps per cycle
  double mg_omega = 2.0 / 3.0; // damped-Jacobi smoother weight
  int min_coarse_size = 500;   // stop coarsening at/below this many rows

  // Study sweeps (used by the mesh-study / eps-study drivers).
  std::vector<int> mesh_study_n = {32, 64, 128};
  std::vector<double> eps_list = {0.02, 0.01};

  // Execution limits.
  int threads = 1;
  long max_dofs = 2000000;

  // Output.
  std::string output_dir = ".";
  int snapshot_every = 0;  // write field snapshots every k steps; 0 = never

  long num_vertices() const {
    long s = static_cast<long>(n) + 1;
    long v = s * s;
    if (dim == 3) v *= s;
    return v;
  }

  /// Throws ConfigError on the first violated constraint.
  void validate() const {
    if (!(eps > 0.0)) throw ConfigError("config: eps must be positive");
    if (sigma < 0.0) throw ConfigError("config: sigma must be nonnegative");
    if (!(std::abs(m) < 1.0))
      throw ConfigError("config: mean m must satisfy |m| < 1");
    if (!(theta > 0.0) || theta > 1.0)
      throw ConfigError("config: theta must lie in (0, 1]");
    if (!(dt > 0.0)) throw ConfigError("config: dt must be positive");
    if (n_steps < 0) throw ConfigError("config: n_steps must be nonnegative");
    if (dim != 2 && dim != 3) throw ConfigError("config: dim must be 2 or 3");
    if (n < 1) throw ConfigError("config: n must be at least 1");
    if (!(newton_tol > 0.0))
      throw ConfigError("config: newton_tol must be positive");
    if (newton_maxit < 1)
      throw ConfigError("config: newton_maxit must be at least 1");
    if (!(gmres_tol > 0.0))
      throw ConfigError("config: gmres_tol must be positive");
    if (gmres_maxit < 1)
      throw ConfigError("config: gmres_maxit must be at least 1");
    if (gmres_restart < 0)
      throw ConfigError("config: gmres_restart must be nonnegative");
    if (cheby_iters < 1)
      throw ConfigError("config: cheby_iters must be at least 1");
    if (cheby_precond != "jacobi" && cheby_precond != "ssor")
      throw ConfigError("config: cheby_precond must be 'jacobi' or 'ssor'");
    if (richardson_steps < 1)
      throw ConfigError("config: richardson_steps must be at least 1");
    if (mg_cycles < 1)
      throw ConfigError("config: mg_cycles must be at least 1");
    if (mg_pre < 0 || mg_post < 0 || mg_pre + mg_post < 1)
      throw ConfigError("config: need at least one smoothing sweep per cycle");
    if (!(mg_omega > 0.0) || !(mg_omega < 2.0))
      throw ConfigError("config: mg_omega must lie in (0, 2)");
    if (min_coarse_size < 1)
      throw ConfigError("config: min_coarse_size must be at least 1");
    for (int sn : mesh_study_n)
      if (sn < 1) throw ConfigError("config: mesh_study_n entries must be >= 1");
    for (double se : eps_list)
      if (!(se > 0.0))
        throw ConfigError("config: eps_list entries must be positive");
    if (threads < 1) throw ConfigError("config: threads must be at least 1");
    if (max_dofs < 1) throw ConfigError("config: max_dofs must be at least 1");
    if (snapshot_every < 0)
      throw ConfigError("config: snapshot_every must be nonnegative");
    if (num_vertices() > max_dofs)
      throw ConfigError(
          "config: mesh has " + std::to_string(num_vertices()) +
          " vertices, exceeding max_dofs = " + std::to_string(max_dofs));
  }
};

}  // namespace okflow
