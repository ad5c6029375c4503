#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "okflow/assembly.hpp"
#include "okflow/config.hpp"
#include "okflow/errors.hpp"
#include "okflow/mesh.hpp"
#include "okflow/model.hpp"
#include "okflow/precond.hpp"
#include "okflow/spectra.hpp"
#include "okflow/vtk.hpp"

namespace okflow {

namespace detail {

inline std::filesystem::path ensure_output_dir(const SolverConfig& cfg) {
  const std::filesystem::path dir =
      cfg.output_dir.empty() ? std::filesystem::path(".")
                             : std::filesystem::path(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ConfigError("output: cannot create directory '" + dir.string() +
                      "': " + ec.message());
  return dir;
}

inline int step_gmres_total(const IterationStats& st) {
  return std::accumulate(st.gmres_iters.begin(), st.gmres_iters.end(), 0);
}

/// Whole-run averaging convention: total GMRES iterations divided by total
/// Newton iterations, over every time step (the initial record contributes
/// neither).
struct RunTotals {
  long newton = 0;
  long gmres = 0;
  double avg_gmres_per_newton() const {
    return newton > 0 ? static_cast<double>(gmres) / static_cast<double>(newton)
                      : 0.0;
  }
};

inline RunTotals run_totals(const std::vector<IterationStats>& stats) {
  RunTotals t;
  for (const IterationStats& st : stats) {
    if (st.step == 0) continue;
    t.newton += st.newton_iters;
    t.gmres += step_gmres_total(st);
  }
  return t;
}

inline std::string format_short(double x) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(4) << x;
  return os.str();
}

}  // namespace detail

/// Time-steps the configured problem, streaming per-step statistics to
/// stats.csv and writing VTK snapshots (always the initial state; later
/// states at the configured cadence). Rows are flushed as they are produced,
/// so a failed step leaves all completed output behind and exits nonzero.
inline int cmd_run(const RunManifest& man) {
  const SolverConfig& cfg = man.config;
  const std::filesystem::path dir = detail::ensure_output_dir(cfg);

  std::ofstream csv(dir / "stats.csv", std::ios::binary);
  if (!csv)
    throw std::runtime_error("run: cannot open " +
                             (dir / "stats.csv").string());
  csv << "step,newton_iters,total_gmres,avg_gmres,residual,mass,energy,"
         "seconds\n";
  csv.flush();

  const auto on_stats = [&](const IterationStats& st) {
    if (st.step == 0) return;  // header-only until the first real step
    const int total = detail::step_gmres_total(st);
    const double avg =
        st.newton_iters > 0
            ? static_cast<double>(total) / static_cast<double>(st.newton_iters)
            : 0.0;
    csv << st.step << ',' << st.newton_iters << ',' << total << ','
        << format_g17(avg) << ',' << format_g17(st.residual_norm) << ','
        << format_g17(st.mass) << ',' << format_g17(st.energy) << ','
        << format_g17(st.seconds) << "\n";
    csv.flush();
  };
  const auto on_state = [&](const StructuredMesh& mesh, const State& s) {
    const bool due =
        s.step == 0 ||
        (cfg.snapshot_every > 0 && s.step % cfg.snapshot_every == 0);
    if (due)
      write_vtk(mesh, s.u, s.w,
                (dir / ("state_" + std::to_string(s.step) + ".vtk")).string());
  };

  SimulationResult result;
  try {
    result = run_simulation(cfg, on_state, man.shat_perturb, on_stats);
  } catch (const NumericalError& e) {
    std::cerr << "run: " << e.what() << "\n";
    return 1;
  }
  const detail::RunTotals t = detail::run_totals(result.stats);
  std::cout << "run: " << cfg.n_steps << " steps, " << cfg.dim << "D n=" << cfg.n
            << ", avg GMRES per Newton = "
            << detail::format_short(t.avg_gmres_per_newton()) << "\n";
  return 0;
}

/// Repeats the configured run over the mesh-refinement list and reports the
/// outer-iteration average per level; the iteration counts should barely
/// move as the mesh is refined.
inline int cmd_mesh_study(const RunManifest& man) {
  const std::filesystem::path dir = detail::ensure_output_dir(man.config);
  std::ofstream csv(dir / "mesh_study.csv", std::ios::binary);
  if (!csv)
    throw std::runtime_error("mesh-study: cannot open " +
                             (dir / "mesh_study.csv").string());
  csv << "n,dofs,avg_gmres_per_newton\n";
  csv.flush();

  std::cout << "mesh study (" << man.config.dim << "D, eps = "
            << detail::format_short(man.config.eps) << ")\n"
            << std::setw(8) << "n" << std::setw(12) << "dofs" << std::setw(24)
            << "avg GMRES per Newton" << "\n";
  for (int n : man.config.mesh_study_n) {
    SolverConfig cfg = man.config;
    cfg.n = n;
    const SimulationResult result =
        run_simulation(cfg, {}, man.shat_perturb);
    const detail::RunTotals t = detail::run_totals(result.stats);
    const long dofs = 2 * cfg.num_vertices();  // two coupled fields
    csv << n << ',' << dofs << ',' << format_g17(t.avg_gmres_per_newton())
        << "\n";
    csv.flush();
    std::cout << std::setw(8) << n << std::setw(12) << dofs << std::setw(24)
              << detail::format_short(t.avg_gmres_per_newton()) << "\n";
  }
  return 0;
}

/// Repeats the run over the interfacial-thickness list with the coupled
/// resolution rule dx = eps/2 (n = round(2/eps)) and time step dt = eps^2;
/// iteration counts should not grow as eps shrinks. Refuses up front if any
/// requested mesh exceeds the configured size cap.
inline int cmd_eps_study(const RunManifest& man) {
  std::vector<SolverConfig> runs;
  for (double eps : man.config.eps_list) {
    SolverConfig cfg = man.config;
    cfg.eps = eps;
    cfg.n = static_cast<int>(std::llround(2.0 / eps));
    cfg.dt = eps * eps;
    if (cfg.num_vertices() > cfg.max_dofs) {
      std::cerr << "eps-study: refusing eps = " << detail::format_short(eps)
                << ": mesh n = " << cfg.n << " has " << cfg.num_vertices()
                << " vertices, exceeding max_dofs = " << cfg.max_dofs << "\n";
      return 2;
    }
    runs.push_back(std::move(cfg));
  }

  const std::filesystem::path dir = detail::ensure_output_dir(man.config);
  std::ofstream csv(dir / "eps_study.csv", std::ios::binary);
  if (!csv)
    throw std::runtime_error("eps-study: cannot open " +
                             (dir / "eps_study.csv").string());
  csv << "eps,dx,dt,avg_gmres_per_newton\n";
  csv.flush();

  std::cout << "eps study (" << man.config.dim << "D)\n"
            << std::setw(12) << "eps" << std::setw(12) << "dx" << std::setw(14)
            << "dt" << std::setw(24) << "avg GMRES per Newton" << "\n";
  for (const SolverConfig& cfg : runs) {
    const SimulationResult result =
        run_simulation(cfg, {}, man.shat_perturb);
    const detail::RunTotals t = detail::run_totals(result.stats);
    const double dx = 1.0 / static_cast<double>(cfg.n);
    csv << format_g17(cfg.eps) << ',' << format_g17(dx) << ','
        << format_g17(cfg.dt) << ',' << format_g17(t.avg_gmres_per_newton())
        << "\n";
    csv.flush();
    std::cout << std::setw(12) << detail::format_short(cfg.eps)
              << std::setw(12) << detail::format_short(dx) << std::setw(14)
              << detail::format_short(cfg.dt) << std::setw(24)
              << detail::format_short(t.avg_gmres_per_newton()) << "\n";
  }
  return 0;
}

/// Desk-scale verification harness: the product-form matching identity, the
/// spectrum's reality, the predicted eigenvalue enclosure under a definite
/// stiffness shift, and exact-solve two-iteration termination. Runs on small
/// fixed meshes (dense eigensolves cap the size) with the configured physics;
/// an injected approximation fault (--perturb-shat) propagates into every
/// check. Writes verify.json; exit 0 only if all checks pass.
inline int cmd_verify(const RunManifest& man) {
  const SolverConfig& base = man.config;
  const double scale = 1.0 + man.shat_perturb;
  const std::filesystem::path dir = detail::ensure_output_dir(base);

  nlohmann::json doc;
  bool all = true;
  const auto note = [&](const std::string& line, bool ok) {
    all = all && ok;
    std::cout << "[verify] " << line << ": " << (ok ? "PASS" : "FAIL") << "\n";
  };

  const double c = compute_c(base.dt, base.theta, base.sigma);
  doc["parameters"] = {{"eps", base.eps},   {"sigma", base.sigma},
                       {"m", base.m},       {"theta", base.theta},
                       {"dt", base.dt},     {"c", c},
                       {"shat_scale", scale}};

  doc["matching_identity"] = nlohmann::json::array();
  for (const auto& [d, n] : {std::pair{2, 8}, std::pair{3, 4}}) {
    const StructuredMesh mesh = build_mesh(d, n);
    const OperatorSet ops = assemble_operators(mesh);
    const double rel =
        matching_identity_relative_error(ops.M, ops.K, c, base.eps, scale);
    const bool ok = rel <= 1e-12;
    doc["matching_identity"].push_back({{"dim", d},
                                        {"n", n},
                                        {"relative_error", rel},
                                        {"tolerance", 1e-12},
                                        {"pass", ok}});
    note("matching identity " + std::to_string(d) + "D n=" + std::to_string(n) +
             " (rel err " + detail::format_short(rel) + ", tol 1e-12)",
         ok);
  }

  // Generic linearization point: a short run of the configured physics on a
  // small fixed mesh.
  SolverConfig snap = base;
  snap.dim = 2;
  snap.n = 8;
  snap.n_steps = 5;
  snap.snapshot_every = 0;
  const SimulationResult sim = run_simulation(snap, {}, man.shat_perturb);
  const Vector& u = sim.final_state.u;

  const SpectralReport r0 = verify_lemmas(sim.mesh, u, snap, 0.0, 1e-8, scale);
  const bool lem1 = r0.max_imag <= 1e-8 * r0.max_abs;
  doc["spectrum_reality"] = {{"delta", 0.0},
                   {"max_imag", r0.max_imag},
                   {"max_abs", r0.max_abs},
                   {"tolerance_ratio", 1e-8},
                   {"pass", lem1}};
  note("spectrum reality (max |Im| " + detail::format_short(r0.max_imag) +
           ", max |lambda| " + detail::format_short(r0.max_abs) + ")",
       lem1);

  doc["spectrum_enclosure"] = nlohmann::json::array();
  for (double delta : {1e-8, 1e-6, 1e-4}) {
    const SpectralReport r = verify_lemmas(sim.mesh, u, snap, delta, 1e-8,
                                           scale);
    const bool ok = r.violations == 0 && r.max_imag <= 1e-8 * r.max_abs;
    doc["spectrum_enclosure"].push_back({{"delta", delta},
                             {"lo", r.lo},
                             {"hi", r.hi},
                             {"violations", r.violations},
                             {"max_imag", r.max_imag},
                             {"pass", ok}});
    note("spectrum enclosure delta=" + detail::format_short(delta) + " ([" +
             detail::format_short(r.lo) + ", " + detail::format_short(r.hi) +
             "], violations " + std::to_string(r.violations) + ")",
         ok);
  }

  doc["two_iteration"] = nlohmann::json::array();
  for (const auto& [d, n] : {std::pair{2, 4}, std::pair{3, 2}}) {
    const StructuredMesh mesh = build_mesh(d, n);
    const Vector uu = interpolate(mesh, [](double x, double y, double z) {
      constexpr double two_pi = 6.283185307179586;
      return 0.4 + 0.3 * std::cos(two_pi * x) * std::cos(two_pi * y) *
                       std::cos(two_pi * z);
    });
    SolverConfig tc = base;
    tc.dim = d;
    tc.n = n;
    const int iters = two_iteration_check(mesh, uu, tc, man.shat_perturb);
    const bool ok = iters <= 2;
    doc["two_iteration"].push_back(
        {{"dim", d}, {"n", n}, {"iterations", iters}, {"limit", 2},
         {"pass", ok}});
    note("two-iteration " + std::to_string(d) + "D n=" + std::to_string(n) +
             " (" + std::to_string(iters) + " <= 2)",
         ok);
  }

  doc["pass"] = all;
  std::ofstream out(dir / "verify.json", std::ios::binary);
  if (!out)
    throw std::runtime_error("verify: cannot open " +
                             (dir / "verify.json").string());
  out << doc.dump(2) << "\n";
  std::cout << "verify: " << (all ? "PASS" : "FAIL") << "\n";
  return all ? 0 : 1;
}

/// Dispatches a parsed manifest to its command.
inline int run_manifest(const RunManifest& man) {
  if (man.kind == "run") return cmd_run(man);
  if (man.kind == "mesh-study") return cmd_mesh_study(man);
  if (man.kind == "eps-study") return cmd_eps_study(man);
  if (man.kind == "verify") return cmd_verify(man);
  throw ConfigError("unknown command kind: " + man.kind);
}

}  // namespace okflow
