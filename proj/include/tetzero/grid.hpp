#pragma once

// Multi-resolution tetrahedral tiling of the unit cube.
//
// Every level-l cube with anchor a (integer lattice corner) is split into six
// Kuhn tetrahedra sharing the main diagonal a -> a + (1,1,1). Tetra t visits the
// cube corners along the axis order kTetraAxes[t]:
//   v0 = a, v1 = v0 + e[first], v2 = v1 + e[second], v3 = a + (1,1,1)
// so a point with fractional coordinates u lies in t iff
// u[first] >= u[second] >= u[third].

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tetzero/geometry.hpp"

namespace tetzero {

using Int3 = std::array<int32_t, 3>;

inline constexpr std::array<std::array<int, 3>, 6> kTetraAxes{{
    {0, 2, 1}, {0, 1, 2}, {1, 0, 2}, {1, 2, 0}, {2, 1, 0}, {2, 0, 1},
}};

/// Local edge e of a tetra joins vertices kTetraEdges[e].
inline constexpr std::array<std::array<int, 2>, 6> kTetraEdges{{
    {0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3},
}};

inline constexpr double kDefaultMaskEps = 1e-7;

struct GridConfig {
  int levels = 4;
  int n_min = 2;
  int n_max = 32;
  /// When non-empty, used verbatim instead of the geometric progression
  /// (allows single-level grids such as N = [1]).
  std::vector<int> resolutions;

  static GridConfig explicit_levels(std::vector<int> n) {
    GridConfig c;
    c.levels = int(n.size());
    c.n_min = n.front();
    c.n_max = n.back();
    c.resolutions = std::move(n);
    return c;
  }
};

/// N[l] = floor(n_min * gamma^l + 1e-9), gamma = (n_max / n_min)^(1/(L-1)).
std::vector<int> level_resolutions(const GridConfig& cfg);

struct TetraId {
  Int3 anchor{};
  uint8_t tetra = 0;
  friend bool operator==(const TetraId&, const TetraId&) = default;
  friend auto operator<=>(const TetraId&, const TetraId&) = default;
};

/// Lattice offsets (in {0,1}^3) of the four ordered vertices of tetra t.
std::array<Int3, 4> tetra_corner_offsets(int t);

/// Absolute lattice coordinates of the four ordered vertices.
std::array<Int3, 4> lattice_vertices(const TetraId& id);

struct TetraRef {
  int level = 0;
  TetraId id;
  std::array<Vec3, 4> v;  // in unit-cube coordinates
};

using Barycentric = std::array<double, 4>;

/// w[1..3] = C^{-1}(x - v0), w[0] = 1 - w1 - w2 - w3 with C = [v1-v0, v2-v0, v3-v0].
Barycentric barycentric(const Vec3& x, const TetraRef& tet);

/// Bit i set iff w[i] > eps.
uint8_t bary_mask(const Barycentric& w, double eps = kDefaultMaskEps);

inline int zero_count(uint8_t mask4) { return 4 - __builtin_popcount(mask4 & 0xF); }

/// One level of a region indicator together with its barycentric mask.
struct LevelTag {
  TetraId id;
  uint8_t mask = 0xF;
  friend bool operator==(const LevelTag&, const LevelTag&) = default;
};

using RegionIndicator = std::vector<TetraId>;
using BarycentricMask = std::vector<uint8_t>;  // one 4-bit mask per level

class Grid {
 public:
  explicit Grid(const GridConfig& cfg);

  const GridConfig& config() const { return cfg_; }
  int levels() const { return static_cast<int>(res_.size()); }
  int resolution(int level) const { return res_[level]; }
  const std::vector<int>& resolutions() const { return res_; }

  /// Half-open cube location with clamping at the upper face; ties inside a
  /// cube go to the lowest tetra index.
  TetraRef locate(const Vec3& x, int level) const;

  /// Fast path: tetra id plus closed-form Kuhn barycentric weights.
  TetraId locate_id(const Vec3& x, int level, Barycentric* w = nullptr) const;

  TetraRef tetra(int level, const TetraId& id) const;

  RegionIndicator region_indicator(const Vec3& x) const;
  std::vector<LevelTag> tags(const Vec3& x, double mask_eps = kDefaultMaskEps) const;

 private:
  GridConfig cfg_;
  std::vector<int> res_;
};

struct NeighborEntry {
  Int3 delta{};
  uint8_t tetra = 0;
  friend bool operator==(const NeighborEntry&, const NeighborEntry&) = default;
  friend auto operator<=>(const NeighborEntry&, const NeighborEntry&) = default;
};

/// Face/edge/vertex neighbor lookup tables. Face and edge rows exclude the
/// tetra itself; the vertex table lists all 24 tetrahedra around cube corner
/// (0,0,0) and is shifted by the corner offset for other corners.
struct NeighborTables {
  std::array<std::array<std::vector<NeighborEntry>, 4>, 6> face;
  std::array<std::array<std::vector<NeighborEntry>, 6>, 6> edge;
  std::vector<NeighborEntry> vertex;

  /// The tables shipped with the library.
  static const NeighborTables& builtin();
  /// Tables recomputed from lattice incidence in a 3x3x3 block of cubes.
  static NeighborTables from_geometry();

  friend bool operator==(const NeighborTables&, const NeighborTables&) = default;
};

/// Tetrahedra (self first) whose closure contains the face of `tag.id`
/// spanned by the vertices whose mask bit is set.
std::vector<TetraId> level_neighbors(const LevelTag& tag,
                                     const NeighborTables& lut = NeighborTables::builtin());

/// Cartesian product of per-level neighbor lists.
std::vector<RegionIndicator> grid_neighbors(const RegionIndicator& r, const BarycentricMask& m,
                                            const NeighborTables& lut = NeighborTables::builtin());

struct LutReport {
  int rows_checked = 0;
  std::vector<std::string> mismatches;
  bool ok() const { return mismatches.empty(); }
};

/// Compares every row of `lut` (as a set) against the lattice incidence oracle
/// and checks face-neighbor symmetry.
LutReport validate_neighbor_tables(const NeighborTables& lut = NeighborTables::builtin());

std::string neighbor_tables_to_json(const NeighborTables& lut);
NeighborTables neighbor_tables_from_json(const std::string& text);

}  // namespace tetzero

template <>
struct std::hash<tetzero::TetraId> {
  std::size_t operator()(const tetzero::TetraId& id) const noexcept {
    uint64_t h = static_cast<uint32_t>(id.anchor[0]);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<uint32_t>(id.anchor[1]);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<uint32_t>(id.anchor[2]);
    h = h * 0x9E3779B97F4A7C15ull ^ id.tetra;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};
