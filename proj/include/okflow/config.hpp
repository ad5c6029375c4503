#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "okflow/errors.hpp"
#include "okflow/params.hpp"

namespace okflow {

/// One parsed experiment request: the solver configuration plus the command
/// kind and the optional fault-injection scale for self-testing.
struct RunManifest {
  SolverConfig config;
  std::string kind = "run";  // run | mesh-study | eps-study | verify
  double shat_perturb = 0.0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const std::size_t a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

// Drops an inline comment: everything from a '#' or ';' that starts the line
// or follows whitespace. A marker glued to non-space (e.g. inside a path) is
// kept as data.
inline std::string strip_inline_comment(const std::string& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((s[i] == '#' || s[i] == ';') &&
        (i == 0 || std::isspace(static_cast<unsigned char>(s[i - 1]))))
      return s.substr(0, i);
  }
  return s;
}

inline double config_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config: value for key '" + key +
                      "' is not a number: '" + value + "'");
  return x;
}

inline int config_int(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config: value for key '" + key +
                      "' is not an integer: '" + value + "'");
  return static_cast<int>(x);
}

inline long config_long(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config: value for key '" + key +
                      "' is not an integer: '" + value + "'");
  return x;
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::stringstream ss(value);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

inline std::vector<int> config_int_list(const std::string& key,
                                        const std::string& value) {
  std::vector<int> out;
  for (const std::string& p : split_list(value))
    out.push_back(config_int(key, p));
  if (out.empty())
    throw ConfigError("config: value for key '" + key + "' is an empty list");
  return out;
}

inline std::vector<double> config_double_list(const std::string& key,
                                              const std::string& value) {
  std::vector<double> out;
  for (const std::string& p : split_list(value))
    out.push_back(config_double(key, p));
  if (out.empty())
    throw ConfigError("config: value for key '" + key + "' is an empty list");
  return out;
}

}  // namespace detail

/// Parses the flat `key = value` configuration format with sections
/// [problem], [mesh], [solver], [output]. Unknown sections or keys are
/// rejected; the eight keys defining the problem and discretization are
/// required; everything else falls back to SolverConfig defaults. The
/// returned manifest has already passed SolverConfig::validate().
inline RunManifest parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file: " + path);

  RunManifest man;
  SolverConfig& cfg = man.config;
  std::set<std::string> seen;
  std::string section;
  std::string line;
  int lineno = 0;

  const auto fail_key = [&](const std::string& key) {
    throw ConfigError("config: unknown key '" + key + "' in section [" +
                      section + "] (line " + std::to_string(lineno) + ")");
  };

  while (std::getline(in, line)) {
    ++lineno;
    const std::string t =
        detail::trim(detail::strip_inline_comment(detail::trim(line)));
    if (t.empty()) continue;

    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config: malformed section header at line " +
                          std::to_string(lineno) + ": " + t);
      section = detail::trim(t.substr(1, t.size() - 2));
      if (section != "problem" && section != "mesh" && section != "solver" &&
          section != "output")
        throw ConfigError("config: unknown section [" + section + "]");
      continue;
    }

    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " +
                        std::to_string(lineno) + ": " + t);
    if (section.empty())
      throw ConfigError("config: key outside any section at line " +
                        std::to_string(lineno) + ": " + t);
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: empty key at line " + std::to_string(lineno));
    seen.insert(key);

    if (section == "problem") {
      if (key == "eps")
        cfg.eps = detail::config_double(key, value);
      else if (key == "sigma")
        cfg.sigma = detail::config_double(key, value);
      else if (key == "m")
        cfg.m = detail::config_double(key, value);
      else if (key == "theta")
        cfg.theta = detail::config_double(key, value);
      else if (key == "eps_list")
        cfg.eps_list = detail::config_double_list(key, value);
      else
        fail_key(key);
    } else if (section == "mesh") {
      if (key == "dim")
        cfg.dim = detail::config_int(key, value);
      else if (key == "n")
        cfg.n = detail::config_int(key, value);
      else if (key == "mesh_study_n")
        cfg.mesh_study_n = detail::config_int_list(key, value);
      else if (key == "max_dofs")
        cfg.max_dofs = detail::config_long(key, value);
      else
        fail_key(key);
    } else if (section == "solver") {
      if (key == "dt")
        cfg.dt = detail::config_double(key, value);
      else if (key == "n_steps")
        cfg.n_steps = detail::config_int(key, value);
      else if (key == "newton_tol")
        cfg.newton_tol = detail::config_double(key, value);
      else if (key == "newton_maxit")
        cfg.newton_maxit = detail::config_int(key, value);
      else if (key == "gmres_tol")
        cfg.gmres_tol = detail::config_double(key, value);
      else if (key == "gmres_maxit")
        cfg.gmres_maxit = detail::config_int(key, value);
      else if (key == "gmres_restart")
        cfg.gmres_restart = detail::config_int(key, value);
      else if (key == "cheby_iters")
        cfg.cheby_iters = detail::config_int(key, value);
      else if (key == "cheby_precond")
        cfg.cheby_precond = value;
      else if (key == "richardson_steps")
        cfg.richardson_steps = detail::config_int(key, value);
      else if (key == "mg_cycles")
        cfg.mg_cycles = detail::config_int(key, value);
      else if (key == "mg_pre")
        cfg.mg_pre = detail::config_int(key, value);
      else if (key == "mg_post")
        cfg.mg_post = detail::config_int(key, value);
      else if (key == "mg_omega")
        cfg.mg_omega = detail::config_double(key, value);
      else if (key == "min_coarse_size")
        cfg.min_coarse_size = detail::config_int(key, value);
      else if (key == "threads")
        cfg.threads = detail::config_int(key, value);
      else
        fail_key(key);
    } else {  // output
      if (key == "directory")
        cfg.output_dir = value;
      else if (key == "snapshot_every")
        cfg.snapshot_every = detail::config_int(key, value);
      else
        fail_key(key);
    }
  }

  for (const char* req :
       {"eps", "sigma", "m", "theta", "dim", "n", "dt", "n_steps"})
    if (!seen.count(req))
      throw ConfigError(std::string("config: missing required key: ") + req);

  cfg.validate();
  return man;
}

}  // namespace okflow
