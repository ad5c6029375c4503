#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "okflow/errors.hpp"
#include "okflow/sparse.hpp"

namespace okflow {

/// Uniform simplicial mesh of the unit square or cube. Each grid square is
/// split into 2 triangles by the same diagonal; each grid cube into 6
/// tetrahedra sharing the main diagonal. Both splits are nested under
/// uniform refinement, so coarse edges carry the fine midpoints exactly.
/// Immutable after construction.
struct StructuredMesh {
  int dim = 0;
  int n = 0;
  double h = 0.0;
  std::vector<double> vertices;  // interleaved coords, dim per vertex
  std::vector<int> cells;        // dim+1 vertex indices per cell

  int num_vertices() const {
    return static_cast<int>(vertices.size()) / dim;
  }
  int num_cells() const { return static_cast<int>(cells.size()) / (dim + 1); }
  int verts_per_cell() const { return dim + 1; }

  double vertex(int v, int d) const {
    return vertices[static_cast<std::size_t>(v) * dim + d];
  }
  int cell_vertex(int c, int k) const {
    return cells[static_cast<std::size_t>(c) * (dim + 1) + k];
  }

  /// Lexicographic vertex numbering: x index varies slowest.
  int grid_index(int i, int j, int k = 0) const {
    const int s = n + 1;
    return dim == 2 ? i * s + j : (i * s + j) * s + k;
  }
  std::array<int, 3> grid_coords(int v) const {
    const int s = n + 1;
    if (dim == 2) return {v / s, v % s, 0};
    return {v / (s * s), (v / s) % s, v % s};
  }
};

inline double cell_volume(const StructuredMesh& m, int c) {
  const int v0 = m.cell_vertex(c, 0);
  if (m.dim == 2) {
    const int v1 = m.cell_vertex(c, 1);
    const int v2 = m.cell_vertex(c, 2);
    const double ax = m.vertex(v1, 0) - m.vertex(v0, 0);
    const double ay = m.vertex(v1, 1) - m.vertex(v0, 1);
    const double bx = m.vertex(v2, 0) - m.vertex(v0, 0);
    const double by = m.vertex(v2, 1) - m.vertex(v0, 1);
    return 0.5 * (ax * by - ay * bx);
  }
  double e[3][3];
  for (int k = 1; k <= 3; ++k) {
    const int vk = m.cell_vertex(c, k);
    for (int d = 0; d < 3; ++d)
      e[k - 1][d] = m.vertex(vk, d) - m.vertex(v0, d);
  }
  const double det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1]) -
                     e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0]) +
                     e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
  return det / 6.0;
}

/// Kahan-compensated sum of all cell volumes.
inline double total_volume(const StructuredMesh& m) {
  double sum = 0.0, comp = 0.0;
  for (int c = 0; c < m.num_cells(); ++c) {
    const double y = cell_volume(m, c) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

inline StructuredMesh build_mesh(int dim, int n) {
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("build_mesh: dim must be 2 or 3");
  if (n < 1) throw std::invalid_argument("build_mesh: n must be positive");

  StructuredMesh m;
  m.dim = dim;
  m.n = n;
  m.h = 1.0 / n;
  const int s = n + 1;

  if (dim == 2) {
    m.vertices.reserve(static_cast<std::size_t>(s) * s * 2);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) {
        m.vertices.push_back(i * m.h);
        m.vertices.push_back(j * m.h);
      }
    m.cells.reserve(static_cast<std::size_t>(n) * n * 6);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const int a = m.grid_index(i, j);
        const int b = m.grid_index(i + 1, j);
        const int c = m.grid_index(i + 1, j + 1);
        const int d = m.grid_index(i, j + 1);
        m.cells.insert(m.cells.end(), {a, b, c});  // below the diagonal a-c
        m.cells.insert(m.cells.end(), {a, c, d});
      }
  } else {
    m.vertices.reserve(static_cast<std::size_t>(s) * s * s * 3);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j)
        for (int k = 0; k < s; ++k) {
          m.vertices.push_back(i * m.h);
          m.vertices.push_back(j * m.h);
          m.vertices.push_back(k * m.h);
        }
    // Six tetrahedra per cube: paths 0 -> e_p -> e_p+e_q -> (1,1,1) over
    // axis permutations (p,q,r); odd permutations get two vertices swapped
    // to keep the signed volume positive.
    static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                        {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    static constexpr bool odd[6] = {false, true, true, false, false, true};
    m.cells.reserve(static_cast<std::size_t>(n) * n * n * 24);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const int base[3] = {i, j, k};
          for (int p = 0; p < 6; ++p) {
            int g[4][3];
            for (int d = 0; d < 3; ++d) g[0][d] = base[d];
            for (int v = 1; v < 4; ++v) {
              for (int d = 0; d < 3; ++d) g[v][d] = g[v - 1][d];
              g[v][perms[p][v - 1]] += 1;
            }
            int idx[4];
            for (int v = 0; v < 4; ++v)
              idx[v] = m.grid_index(g[v][0], g[v][1], g[v][2]);
            if (odd[p]) std::swap(idx[1], idx[2]);
            m.cells.insert(m.cells.end(), {idx[0], idx[1], idx[2], idx[3]});
          }
        }
  }

  for (int c = 0; c < m.num_cells(); ++c)
    if (cell_volume(m, c) <= 0.0)
      throw InconsistentState("build_mesh: non-positive cell volume");
  if (std::abs(total_volume(m) - 1.0) > 1e-14)
    throw InconsistentState("build_mesh: cell volumes do not sum to 1");
  return m;
}

inline StructuredMesh coarsen(const StructuredMesh& mesh) {
  if (mesh.n % 2 != 0)
    throw CannotCoarsen("coarsen: cells per axis must be even");
  return build_mesh(mesh.dim, mesh.n / 2);
}

/// Linear interpolation matrix from the coarse to the fine P1 space. Fine
/// vertices at coarse grid points copy the coarse value; every other fine
/// vertex is the midpoint of a coarse edge (both splits keep the diagonals
/// aligned across refinement), so it averages the two endpoint values.
inline SparseMatrix prolongation(const StructuredMesh& coarse,
                                 const StructuredMesh& fine) {
  if (coarse.dim != fine.dim || fine.n != 2 * coarse.n)
    throw std::invalid_argument("prolongation: meshes are not nested");
  const int dim = fine.dim;
  std::vector<Triplet> ts;
  ts.reserve(static_cast<std::size_t>(fine.num_vertices()) * 2);
  for (int v = 0; v < fine.num_vertices(); ++v) {
    const auto g = fine.grid_coords(v);
    int lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
    bool on_coarse = true;
    for (int d = 0; d < dim; ++d) {
      lo[d] = g[d] / 2;
      hi[d] = (g[d] + 1) / 2;
      if (g[d] % 2 != 0) on_coarse = false;
    }
    if (on_coarse) {
      ts.push_back({v, coarse.grid_index(lo[0], lo[1], lo[2]), 1.0});
    } else {
      ts.push_back({v, coarse.grid_index(lo[0], lo[1], lo[2]), 0.5});
      ts.push_back({v, coarse.grid_index(hi[0], hi[1], hi[2]), 0.5});
    }
  }
  return SparseMatrix::from_triplets(fine.num_vertices(),
                                     coarse.num_vertices(), std::move(ts));
}

}  // namespace okflow
