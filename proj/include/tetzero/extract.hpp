#pragma once

// Exact zero-level-set extraction: the skeleton of the encoder's polyhedral
// complex is refined neuron by neuron (split crossing edges, then connect the
// new vertices inside each region), and the output neuron's zero set is
// triangulated region by region.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tetzero/mesh.hpp"
#include "tetzero/net.hpp"
#include "tetzero/skeleton.hpp"

namespace tetzero {

struct ExtractConfig {
  double eps_s = 1e-10;  // pre-activation sign threshold (64-bit)
  double eps_f = 1e-9;   // zero-set selection on cached f
  double eps_b = 1e-7;   // barycentric mask tolerance for skeleton tags
  double planarity_tol = 1e-7;
  double min_area = 1e-14;
  std::size_t max_neighbors = std::size_t(1) << 20;
};

struct PassStats {
  int neuron = 0;
  std::size_t split = 0;      // vertices inserted
  std::size_t connected = 0;  // edges added inside regions
  std::size_t vertices = 0;   // totals after the pass
  std::size_t edges = 0;
  double seconds = 0.0;
};

/// One region of the complex: a tetra per level plus a full sign pattern over
/// the first `relu.size()` neurons.
struct RegionKey {
  RegionIndicator grid;
  std::vector<int8_t> relu;
  friend bool operator==(const RegionKey&, const RegionKey&) = default;
};

class SubdivisionState {
 public:
  SubdivisionState(const Model& model, const Skeleton& skeleton, const ExtractConfig& cfg = {});

  const Model& model() const { return *model_; }
  const ExtractConfig& config() const { return cfg_; }
  int levels() const { return L_; }
  /// Hidden neurons plus the output neuron.
  int neurons() const { return model_->mlp.neurons(); }
  /// Neurons folded in so far; the next pass processes neuron `processed()`.
  int processed() const { return processed_; }

  std::size_t vertex_count() const { return pos_.size(); }
  const Vec3& position(uint32_t v) const { return pos_[v]; }
  std::span<const LevelTag> tags(uint32_t v) const { return {tags_.data() + std::size_t(v) * L_, std::size_t(L_)}; }
  int sign(uint32_t v, int neuron) const {
    const uint64_t c = (signs_[std::size_t(v) * words_ + (neuron >> 5)] >> (2 * (neuron & 31))) & 3u;
    return c == 1 ? 1 : (c == 2 ? -1 : 0);
  }
  /// f at the vertex, evaluated in 64-bit when the vertex was created.
  double value(uint32_t v) const { return f_[v]; }
  const std::vector<std::array<uint32_t, 2>>& edges() const { return edges_; }

  /// Splits every edge whose endpoints have strictly opposite signs for
  /// neuron g (g <= processed()). Returns the number of inserted vertices.
  std::size_t split_edges(int g);
  /// Connects zero vertices of neuron g lying on a common 2-face of a common
  /// region. Returns the number of edges added.
  std::size_t connect_region_edges(int g);
  /// split + connect for neuron processed(), then advances the cursor.
  PassStats process_next();

  /// Regions whose closure contains vertex v: per-level tetra neighbors times
  /// +/- perturbations of the zero entries among the first `upto` neurons.
  /// In-domain pruning drops tetrahedra outside [0,1]^3.
  std::vector<RegionKey> neighbor_regions(uint32_t v, int upto, bool in_domain_only = false) const;

  /// Vertex pair bounds a common region at stage g (A(a) and A(b) intersect
  /// over levels and neurons < g).
  bool share_region(uint32_t a, uint32_t b, int g) const;

 private:
  uint32_t add_vertex(const Vec3& y, const LevelTag* tags, const std::vector<int>& fixed, int upto);
  void set_sign(uint32_t v, int neuron, int s);
  double preact(uint32_t v, int g) const;

  const Model* model_;
  ExtractConfig cfg_;
  int L_ = 0;
  int words_ = 0;
  int processed_ = 0;
  std::vector<Vec3> pos_;
  std::vector<LevelTag> tags_;  // vertex-major, L_ per vertex
  std::vector<uint64_t> signs_;  // words_ per vertex
  std::vector<double> f_;
  std::vector<std::array<uint32_t, 2>> edges_;
};

/// Affine form f(y) = g . y + c of the network on one region (grid space).
struct RegionAffine {
  Vec3 grad;
  double offset = 0.0;
};
RegionAffine region_affine(const Model& model, const RegionKey& region);

struct ZeroSet {
  std::vector<uint32_t> vertices;
  std::vector<std::array<uint32_t, 2>> edges;
};

ZeroSet zero_set(const SubdivisionState& state, double eps_f);

struct ExtractReport {
  std::size_t skeleton_vertices = 0;
  std::size_t skeleton_edges = 0;
  std::vector<PassStats> passes;
  std::size_t zero_vertices = 0;
  std::size_t zero_edges = 0;
  std::size_t polygons = 0;
  std::size_t skipped_degenerate = 0;  // groups with < 3 vertices or no area
  std::size_t skipped_flat = 0;        // |grad f| < 1e-12
  std::size_t duplicate_polygons = 0;  // same polygon from both sides of a 2-face
  std::size_t dropped_triangles = 0;   // area <= min_area
  std::size_t missing_polygon_edges = 0;  // polygon sides absent from E*
  double seconds_subdivide = 0.0;
  double seconds_faces = 0.0;

  std::string to_json() const;
};

/// Triangulates the zero set region by region. Vertices are mapped back to
/// scene coordinates; triangles face along grad f.
Mesh faces(const SubdivisionState& state, const ZeroSet& zs, ExtractReport* report = nullptr);

/// Whole pipeline on a prebuilt skeleton: all hidden neurons, the output
/// neuron, zero set, faces.
Mesh extract_mesh(const Model& model, const Skeleton& skeleton, const ExtractConfig& cfg = {},
                  ExtractReport* report = nullptr);

}  // namespace tetzero
