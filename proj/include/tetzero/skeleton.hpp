#pragma once

// Vertices and edges of the polyhedral complex induced by all grid levels:
// the arrangement of six plane families restricted to [0,1]^3.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tetzero/grid.hpp"

namespace tetzero {

inline constexpr int kFamilies = 6;

struct PlaneFamily {
  Int3 normal_int;              // (1,0,0), ..., (1,-1,0), (0,1,-1), (1,0,-1)
  Vec3 normal;                  // unit normal
  std::vector<double> offsets;  // along the unit normal, strictly increasing
  std::vector<double> raw;      // along normal_int (offsets * |normal_int|)
};

/// Axis families carry k/N[l]; diagonal families carry m/N[l] for m in [-N, N],
/// merged across levels and deduplicated at 1e-12.
std::vector<PlaneFamily> plane_families(const std::vector<int>& resolutions);

struct Skeleton {
  std::vector<Vec3> vertices;
  /// Offset index of the plane of each family through the vertex, or -1.
  std::vector<std::array<int32_t, kFamilies>> incidence;
  std::vector<std::array<uint32_t, 2>> edges;  // (a < b), sorted
};

/// Triple-plane solves over all non-singular family triplets, domain clip at
/// 1e-9 and deduplication on a 1e-9 grid. Fills vertices and incidence.
Skeleton extract_vertices(const std::vector<PlaneFamily>& families);

/// Consecutive vertices along every line of two planes.
void extract_edges(const std::vector<PlaneFamily>& families, Skeleton& s);

Skeleton extract_skeleton(const Grid& grid);

/// Per-vertex level tags (vertex-major, grid.levels() entries per vertex).
std::vector<LevelTag> annotate(const Skeleton& s, const Grid& grid, double mask_eps = kDefaultMaskEps);

/// SHA-256 hex digest of the grid-relevant configuration.
std::string grid_digest(const Grid& grid);

void save_skeleton(const std::string& path, const Skeleton& s, const std::string& digest);
/// Returns false if the file is missing or was built for another digest.
bool load_skeleton(const std::string& path, const std::string& digest, Skeleton& s);

/// Loads `dir/skeleton-<digest>.bin` if present, otherwise builds and saves it.
Skeleton cached_skeleton(const Grid& grid, const std::string& dir, bool* hit = nullptr);

}  // namespace tetzero
