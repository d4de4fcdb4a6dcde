#pragma once

// Indexed triangle meshes: OBJ / binary PLY I/O and closedness checks.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tetzero/geometry.hpp"

namespace tetzero {

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<uint32_t, 3>> triangles;
  /// Identity of the linear region each triangle came from (0 when unknown).
  std::vector<uint64_t> region;

  bool empty() const { return triangles.empty(); }
  Vec3 normal(std::size_t t) const;  // unnormalized, |n| = 2 * area
  double area(std::size_t t) const;
};

double surface_area(const Mesh& m);

/// ASCII OBJ; counterclockwise winding seen from outside.
void write_obj(const std::string& path, const Mesh& m);
/// Binary little-endian PLY (double vertices, uint32 indices).
void write_ply(const std::string& path, const Mesh& m);
Mesh read_obj(const std::string& path);
Mesh read_ply(const std::string& path);
/// Dispatches on the file extension.
Mesh read_mesh(const std::string& path);
void write_mesh(const std::string& path, const Mesh& m);

struct TopologyReport {
  std::size_t edges = 0;
  std::size_t boundary_edges = 0;     // used by one triangle
  std::size_t nonmanifold_edges = 0;  // used by more than two
  std::size_t misoriented_edges = 0;  // two uses with the same direction
  bool closed_manifold() const {
    return edges > 0 && boundary_edges == 0 && nonmanifold_edges == 0 && misoriented_edges == 0;
  }
};

TopologyReport check_topology(const Mesh& m);

/// Welds vertices closer than tol (hashed grid); drops collapsed triangles.
Mesh weld(const Mesh& m, double tol);

}  // namespace tetzero
