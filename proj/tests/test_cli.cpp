#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "okflow/config.hpp"
#include "okflow/driver.hpp"
#include "okflow/mesh.hpp"
#include "okflow/vtk.hpp"

using namespace okflow;
namespace fs = std::filesystem;

namespace {

/// Swallows the driver's stdout/stderr chatter so test output stays clean;
/// the captured text remains available for content assertions.
class StreamCapture {
 public:
  StreamCapture()
      : out_(std::cout.rdbuf(buf_.rdbuf())),
        err_(std::cerr.rdbuf(ebuf_.rdbuf())) {}
  ~StreamCapture() {
    std::cout.rdbuf(out_);
    std::cerr.rdbuf(err_);
  }
  std::string out() const { return buf_.str(); }
  std::string err() const { return ebuf_.str(); }

 private:
  std::ostringstream buf_, ebuf_;
  std::streambuf* out_;
  std::streambuf* err_;
};

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("okflow_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  REQUIRE(out.good());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(line);
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

/// Reads both scalar fields back from a legacy structured-points file.
std::pair<std::vector<double>, std::vector<double>> parse_vtk_fields(
    const fs::path& path, int expected_points) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<double>> fields;
  std::string token;
  while (in >> token) {
    if (token != "LOOKUP_TABLE") continue;
    in >> token;  // table name
    std::vector<double> values(static_cast<std::size_t>(expected_points));
    for (double& v : values) REQUIRE((in >> v));
    fields.push_back(std::move(values));
  }
  REQUIRE(fields.size() == 2);
  return {fields[0], fields[1]};
}

std::string minimal_config(const std::string& extra = "") {
  return "[problem]\n"
         "eps = 0.02\n"
         "sigma = 100.0\n"
         "m = 0.4\n"
         "theta = 0.5\n"
         "[mesh]\n"
         "dim = 2\n"
         "n = 16\n"
         "[solver]\n"
         "dt = 0.0004\n"
         "n_steps = 3\n" +
         extra;
}

int run_binary(const std::string& args) {
  const int status = std::system((std::string(OKFLOW_BIN) + " " + args +
                                  " > /dev/null 2> /dev/null")
                                     .c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("number formatting is locale-independent and round-trips") {
  REQUIRE(format_g17(0.0) == "0");
  REQUIRE(format_g17(0.5) == "0.5");
  REQUIRE(format_g17(1.0) == "1");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1e3, 1e3);
  for (int rep = 0; rep < 200; ++rep) {
    const double x = dist(rng);
    const double back = std::strtod(format_g17(x).c_str(), nullptr);
    REQUIRE(back == x);
  }
}

TEST_CASE("structured-points snapshot matches its golden bytes") {
  const fs::path dir = fresh_dir("golden");
  const StructuredMesh mesh = build_mesh(2, 2);
  const Vector zero(9, 0.0);
  const fs::path path = dir / "state_0.vtk";
  write_vtk(mesh, zero, zero, path.string());

  std::string zeros;
  for (int i = 0; i < 9; ++i) zeros += "0\n";
  const std::string golden =
      "# vtk DataFile Version 3.0\n"
      "okflow state\n"
      "ASCII\n"
      "DATASET STRUCTURED_POINTS\n"
      "DIMENSIONS 3 3 1\n"
      "ORIGIN 0 0 0\n"
      "SPACING 0.5 0.5 0.5\n"
      "POINT_DATA 9\n"
      "SCALARS u double 1\n"
      "LOOKUP_TABLE default\n" +
      zeros +
      "SCALARS w double 1\n"
      "LOOKUP_TABLE default\n" +
      zeros;
  REQUIRE(read_file(path) == golden);
}

TEST_CASE("snapshot values round-trip in the format's native point order") {
  const fs::path dir = fresh_dir("roundtrip");

  const StructuredMesh mesh2 = build_mesh(2, 4);
  const Vector u2 = interpolate(
      mesh2, [](double x, double y, double) { return x + 10.0 * y; });
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector w2(u2.size());
  for (double& v : w2) v = dist(rng);
  const fs::path p2 = dir / "plane.vtk";
  write_vtk(mesh2, u2, w2, p2.string());
  const auto [ru2, rw2] = parse_vtk_fields(p2, 25);
  // x varies fastest in the file; the mesh numbers vertices x-slowest.
  for (int j = 0, p = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i, ++p) {
      REQUIRE(ru2[static_cast<std::size_t>(p)] ==
              u2[static_cast<std::size_t>(mesh2.grid_index(i, j))]);
      REQUIRE(rw2[static_cast<std::size_t>(p)] ==
              w2[static_cast<std::size_t>(mesh2.grid_index(i, j))]);
    }

  const StructuredMesh mesh3 = build_mesh(3, 2);
  const Vector u3 =
      interpolate(mesh3, [](double x, double, double) { return x; });
  const Vector w3 = interpolate(
      mesh3, [](double, double y, double z) { return y + 100.0 * z; });
  const fs::path p3 = dir / "volume.vtk";
  write_vtk(mesh3, u3, w3, p3.string());
  const std::string text = read_file(p3);
  REQUIRE(text.find("DIMENSIONS 3 3 3") != std::string::npos);
  const auto [ru3, rw3] = parse_vtk_fields(p3, 27);
  for (int k = 0, p = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i, ++p) {
        REQUIRE(ru3[static_cast<std::size_t>(p)] == 0.5 * i);
        REQUIRE(rw3[static_cast<std::size_t>(p)] == 0.5 * j + 50.0 * k);
      }
}

TEST_CASE("config files parse into validated solver settings") {
  const fs::path dir = fresh_dir("parse");
  const fs::path path = dir / "full.ini";
  write_file(path,
             "# full configuration\n"
             "[problem]\n"
             "eps = 0.01\n"
             "sigma = 50\n"
             "m = -0.2\n"
             "theta = 1\n"
             "eps_list = 0.02, 0.01\n"
             "\n"
             "[mesh]\n"
             "dim = 3\n"
             "n = 4\n"
             "mesh_study_n = 4, 8, 16\n"
             "max_dofs = 500000\n"
             "\n"
             "[solver]\n"
             "dt = 0.0001\n"
             "n_steps = 7\n"
             "newton_tol = 1e-9\n"
             "newton_maxit = 12\n"
             "gmres_tol = 1e-7\n"
             "gmres_maxit = 150\n"
             "gmres_restart = 40\n"
             "cheby_iters = 8\n"
             "cheby_precond = ssor\n"
             "richardson_steps = 3\n"
             "mg_cycles = 4\n"
             "mg_pre = 1\n"
             "mg_post = 3\n"
             "mg_omega = 0.8\n"
             "min_coarse_size = 200\n"
             "threads = 2\n"
             "\n"
             "[output]\n"
             "directory = results\n"
             "snapshot_every = 5\n");
  const RunManifest man = parse_config(path.string());
  const SolverConfig& c = man.config;
  REQUIRE(man.kind == "run");
  REQUIRE(man.shat_perturb == 0.0);
  REQUIRE(c.eps == 0.01);
  REQUIRE(c.sigma == 50.0);
  REQUIRE(c.m == -0.2);
  REQUIRE(c.theta == 1.0);
  REQUIRE(c.eps_list == std::vector<double>{0.02, 0.01});
  REQUIRE(c.dim == 3);
  REQUIRE(c.n == 4);
  REQUIRE(c.mesh_study_n == std::vector<int>{4, 8, 16});
  REQUIRE(c.max_dofs == 500000);
  REQUIRE(c.dt == 0.0001);
  REQUIRE(c.n_steps == 7);
  REQUIRE(c.newton_tol == 1e-9);
  REQUIRE(c.newton_maxit == 12);
  REQUIRE(c.gmres_tol == 1e-7);
  REQUIRE(c.gmres_maxit == 150);
  REQUIRE(c.gmres_restart == 40);
  REQUIRE(c.cheby_iters == 8);
  REQUIRE(c.cheby_precond == "ssor");
  REQUIRE(c.richardson_steps == 3);
  REQUIRE(c.mg_cycles == 4);
  REQUIRE(c.mg_pre == 1);
  REQUIRE(c.mg_post == 3);
  REQUIRE(c.mg_omega == 0.8);
  REQUIRE(c.min_coarse_size == 200);
  REQUIRE(c.threads == 2);
  REQUIRE(c.output_dir == "results");
  REQUIRE(c.snapshot_every == 5);

  // Absent optional keys keep their defaults.
  const fs::path mini = dir / "mini.ini";
  write_file(mini, minimal_config());
  const RunManifest dm = parse_config(mini.string());
  REQUIRE(dm.config.gmres_tol == 1e-6);
  REQUIRE(dm.config.cheby_iters == 10);
  REQUIRE(dm.config.richardson_steps == 2);
  REQUIRE(dm.config.mg_cycles == 5);
  REQUIRE(dm.config.mesh_study_n == std::vector<int>{32, 64, 128});
  REQUIRE(dm.config.output_dir == ".");

  // Inline comments after values and section headers are stripped; a marker
  // glued to non-space stays part of the value.
  const fs::path inl = dir / "inline.ini";
  write_file(inl,
             "[problem]  ; section note\n"
             "eps = 0.02   # interfacial thickness\n"
             "sigma = 100 ; coupling\n"
             "m = 0.4\n"
             "theta = 0.5\n"
             "[mesh]\n"
             "dim = 2\n"
             "n = 8\n"
             "[solver]\n"
             "dt = 0.0004\t# paired step\n"
             "n_steps = 2\n"
             "[output]\n"
             "directory = runs#7\n");
  const RunManifest im = parse_config(inl.string());
  REQUIRE(im.config.eps == 0.02);
  REQUIRE(im.config.sigma == 100.0);
  REQUIRE(im.config.dt == 0.0004);
  REQUIRE(im.config.n_steps == 2);
  REQUIRE(im.config.output_dir == "runs#7");
}

TEST_CASE("config errors name the offending key or section") {
  const fs::path dir = fresh_dir("badcfg");
  const auto expect_error = [&](const std::string& name,
                                const std::string& content,
                                const std::string& needle) {
    const fs::path path = dir / name;
    write_file(path, content);
    try {
      parse_config(path.string());
      FAIL("expected a config error for " + name);
    } catch (const ConfigError& e) {
      INFO("message: " << e.what());
      REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  expect_error("missing_eps.ini",
               "[problem]\nsigma = 100\nm = 0.4\ntheta = 0.5\n"
               "[mesh]\ndim = 2\nn = 16\n[solver]\ndt = 0.0004\nn_steps = 1\n",
               "missing required key: eps");
  expect_error("theta_zero.ini",
               "[problem]\neps = 0.02\nsigma = 100\nm = 0.4\ntheta = 0\n"
               "[mesh]\ndim = 2\nn = 16\n[solver]\ndt = 0.0004\nn_steps = 1\n",
               "theta");
  expect_error("unknown_key.ini", minimal_config("wibble = 3\n"), "wibble");
  expect_error("unknown_section.ini", minimal_config("[fluids]\nrho = 1\n"),
               "fluids");
  expect_error("bad_number.ini",
               "[problem]\neps = banana\nsigma = 100\nm = 0.4\ntheta = 0.5\n"
               "[mesh]\ndim = 2\nn = 16\n[solver]\ndt = 0.0004\nn_steps = 1\n",
               "eps");
  expect_error("bad_int.ini",
               "[problem]\neps = 0.02\nsigma = 100\nm = 0.4\ntheta = 0.5\n"
               "[mesh]\ndim = 2\nn = 4.5\n[solver]\ndt = 0.0004\nn_steps = 1\n",
               "n");
  expect_error("no_section.ini", "eps = 0.02\n", "outside any section");

  REQUIRE_THROWS_AS(parse_config((dir / "does_not_exist.ini").string()),
                    ConfigError);
}

TEST_CASE("run command writes stats, snapshots, and honors a zero-step run") {
  const fs::path dir0 = fresh_dir("run0");
  RunManifest man;
  man.config.dim = 2;
  man.config.n = 8;
  man.config.n_steps = 0;
  man.config.output_dir = dir0.string();
  {
    StreamCapture quiet;
    REQUIRE(cmd_run(man) == 0);
  }
  const auto header = read_lines(dir0 / "stats.csv");
  REQUIRE(header.size() == 1);
  REQUIRE(header[0] ==
          "step,newton_iters,total_gmres,avg_gmres,residual,mass,energy,"
          "seconds");
  REQUIRE(fs::exists(dir0 / "state_0.vtk"));
  REQUIRE_FALSE(fs::exists(dir0 / "state_1.vtk"));

  const fs::path dir2 = fresh_dir("run2");
  man.config.n = 16;
  man.config.n_steps = 2;
  man.config.snapshot_every = 1;
  man.config.output_dir = dir2.string();
  {
    StreamCapture quiet;
    REQUIRE(cmd_run(man) == 0);
  }
  const auto lines = read_lines(dir2 / "stats.csv");
  REQUIRE(lines.size() == 3);
  const auto row1 = split_csv(lines[1]);
  const auto row2 = split_csv(lines[2]);
  REQUIRE(row1.size() == 8);
  REQUIRE(row1[0] == "1");
  REQUIRE(row2[0] == "2");
  const double mass1 = std::stod(row1[5]);
  const double mass2 = std::stod(row2[5]);
  REQUIRE(std::abs(mass1 - 0.4) <= 1e-8);
  REQUIRE(std::abs(mass2 - 0.4) <= 1e-8);
  const double res1 = std::stod(row1[4]);
  REQUIRE(res1 >= 0.0);
  REQUIRE(res1 <= 1e-6);
  for (const char* snap : {"state_0.vtk", "state_1.vtk", "state_2.vtk"})
    REQUIRE(fs::exists(dir2 / snap));
}

TEST_CASE("mesh study emits one row per level with the averaging convention") {
  const fs::path dir = fresh_dir("meshstudy");
  RunManifest man;
  man.config.dim = 2;
  man.config.n_steps = 2;
  man.config.mesh_study_n = {4, 8};
  man.config.output_dir = dir.string();
  std::string table;
  {
    StreamCapture quiet;
    REQUIRE(cmd_mesh_study(man) == 0);
    table = quiet.out();
  }
  REQUIRE(table.find("avg GMRES per Newton") != std::string::npos);

  const auto lines = read_lines(dir / "mesh_study.csv");
  REQUIRE(lines.size() == 3);
  REQUIRE(lines[0] == "n,dofs,avg_gmres_per_newton");
  const auto row1 = split_csv(lines[1]);
  const auto row2 = split_csv(lines[2]);
  REQUIRE(row1[0] == "4");
  REQUIRE(row1[1] == "50");  // both coupled fields on (4+1)^2 vertices
  REQUIRE(row2[0] == "8");
  REQUIRE(row2[1] == "162");

  // The emitted average follows the whole-run convention: total GMRES over
  // total Newton, reproduced here from an identical deterministic run.
  SolverConfig repeat = man.config;
  repeat.n = 8;
  const SimulationResult res = run_simulation(repeat);
  long newton = 0, gmres = 0;
  for (const IterationStats& st : res.stats) {
    newton += st.newton_iters;
    for (int g : st.gmres_iters) gmres += g;
  }
  REQUIRE(newton > 0);
  const double expected = static_cast<double>(gmres) /
                          static_cast<double>(newton);
  REQUIRE(std::stod(row2[2]) == expected);
}

TEST_CASE("eps study pairs resolution with thickness and enforces the cap") {
  const fs::path dir = fresh_dir("epsstudy");
  RunManifest man;
  man.config.dim = 2;
  man.config.n_steps = 1;
  man.config.eps_list = {0.08};
  man.config.output_dir = dir.string();
  {
    StreamCapture quiet;
    REQUIRE(cmd_eps_study(man) == 0);
  }
  const auto lines = read_lines(dir / "eps_study.csv");
  REQUIRE(lines.size() == 2);
  REQUIRE(lines[0] == "eps,dx,dt,avg_gmres_per_newton");
  const auto row = split_csv(lines[1]);
  REQUIRE(std::stod(row[0]) == 0.08);
  REQUIRE(std::stod(row[1]) == 1.0 / 25.0);  // n = round(2/eps) = 25
  REQUIRE(std::stod(row[2]) == 0.08 * 0.08);
  REQUIRE(std::stod(row[3]) > 0.0);

  // A thickness whose paired mesh exceeds the cap is refused up front.
  const fs::path dir2 = fresh_dir("epsrefuse");
  man.config.eps_list = {0.001};  // n = 2000 -> 4004001 vertices
  man.config.output_dir = dir2.string();
  std::string message;
  {
    StreamCapture quiet;
    REQUIRE(cmd_eps_study(man) == 2);
    message = quiet.err();
  }
  REQUIRE(message.find("max_dofs") != std::string::npos);
  REQUIRE_FALSE(fs::exists(dir2 / "eps_study.csv"));
}

TEST_CASE("verify command writes a report and its self-test detects faults") {
  const fs::path dir = fresh_dir("verify");
  RunManifest man;
  man.config.dim = 2;
  man.config.n = 16;
  man.config.n_steps = 3;
  man.config.output_dir = dir.string();
  man.kind = "verify";
  {
    StreamCapture quiet;
    REQUIRE(run_manifest(man) == 0);
  }
  const nlohmann::json doc = nlohmann::json::parse(read_file(dir /
                                                             "verify.json"));
  REQUIRE(doc.at("pass").get<bool>());
  REQUIRE(doc.at("spectrum_enclosure").size() == 3);
  REQUIRE(doc.at("matching_identity").size() == 2);
  REQUIRE(doc.at("two_iteration").size() == 2);
  for (const auto& entry : doc.at("spectrum_enclosure")) {
    REQUIRE(entry.at("violations").get<int>() == 0);
    REQUIRE(entry.at("pass").get<bool>());
  }
  REQUIRE(doc.at("spectrum_reality").at("pass").get<bool>());

  // Injected approximation fault: the harness must notice its own bug.
  const fs::path dir2 = fresh_dir("verify_fault");
  man.config.output_dir = dir2.string();
  man.shat_perturb = 0.1;
  {
    StreamCapture quiet;
    REQUIRE(run_manifest(man) == 1);
  }
  const nlohmann::json bad = nlohmann::json::parse(read_file(dir2 /
                                                             "verify.json"));
  REQUIRE_FALSE(bad.at("pass").get<bool>());
  for (const auto& entry : bad.at("matching_identity"))
    REQUIRE_FALSE(entry.at("pass").get<bool>());
  for (const auto& entry : bad.at("two_iteration"))
    REQUIRE_FALSE(entry.at("pass").get<bool>());
}

TEST_CASE("binary parses arguments and propagates exit codes") {
  const fs::path dir = fresh_dir("binary");
  const fs::path cfg = dir / "cfg.ini";
  write_file(cfg, minimal_config("[output]\ndirectory = " +
                                 (dir / "out").string() + "\n"));

  REQUIRE(run_binary("run --config " + cfg.string()) == 0);
  REQUIRE(fs::exists(dir / "out" / "stats.csv"));

  // --output overrides the configured directory.
  REQUIRE(run_binary("run --config " + cfg.string() + " --output " +
                     (dir / "other").string()) == 0);
  REQUIRE(fs::exists(dir / "other" / "stats.csv"));

  REQUIRE(run_binary("verify --config " + cfg.string()) == 0);
  REQUIRE(run_binary("verify --config " + cfg.string() +
                     " --perturb-shat 0.1") == 1);

  // Usage errors: no subcommand, unknown flag, missing config file.
  REQUIRE(run_binary("") != 0);
  REQUIRE(run_binary("run --config " + cfg.string() + " --bogus") != 0);
  REQUIRE(run_binary("run --config " + (dir / "nope.ini").string()) == 2);

  // Config validation failures exit with the dedicated code.
  const fs::path bad = dir / "bad.ini";
  write_file(bad,
             "[problem]\neps = 0.02\nsigma = 100\nm = 0.4\ntheta = 0\n"
             "[mesh]\ndim = 2\nn = 16\n[solver]\ndt = 0.0004\nn_steps = 1\n");
  REQUIRE(run_binary("run --config " + bad.string()) == 2);
}
