#pragma once

#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>
#include <string>

#include "okflow/errors.hpp"
#include "okflow/mesh.hpp"
#include "okflow/vec.hpp"

namespace okflow {

/// Locale-independent number rendering: classic-"C" decimal point, 17
/// significant digits, shortest form ("0" stays "0", "0.5" stays "0.5").
inline std::string format_g17(double x) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << x;
  return os.str();
}

/// Writes nodal fields u and w as a legacy-VTK STRUCTURED_POINTS file.
/// The vertices of a structured mesh lie on a tensor grid, so no cell
/// connectivity is emitted; point data is written in the format's native
/// lexicographic order (x fastest, z slowest).
inline void write_vtk(const StructuredMesh& mesh, const Vector& u,
                      const Vector& w, const std::string& path) {
  const int nv = mesh.num_vertices();
  if (static_cast<int>(u.size()) != nv || static_cast<int>(w.size()) != nv)
    throw InconsistentState("write_vtk: field size does not match mesh");

  const int s = mesh.n + 1;
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "# vtk DataFile Version 3.0\n";
  os << "okflow state\n";
  os << "ASCII\n";
  os << "DATASET STRUCTURED_POINTS\n";
  os << "DIMENSIONS " << s << " " << s << " " << (mesh.dim == 3 ? s : 1)
     << "\n";
  os << "ORIGIN 0 0 0\n";
  const std::string h = format_g17(mesh.h);
  os << "SPACING " << h << " " << h << " " << h << "\n";
  os << "POINT_DATA " << nv << "\n";

  const auto emit_field = [&](const char* name, const Vector& f) {
    os << "SCALARS " << name << " double 1\n";
    os << "LOOKUP_TABLE default\n";
    const int nz = mesh.dim == 3 ? s : 1;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < s; ++j)
        for (int i = 0; i < s; ++i)
          os << format_g17(f[static_cast<std::size_t>(
                    mesh.grid_index(i, j, k))])
             << "\n";
  };
  emit_field("u", u);
  emit_field("w", w);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_vtk: cannot open " + path);
  out << os.str();
  if (!out) throw std::runtime_error("write_vtk: write failed for " + path);
}

}  // namespace okflow
