#pragma once

// Marching Cubes baseline and mesh metrics: Chamfer distance, surface and
// vertex SDF residuals, normal angle deviation.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tetzero/mesh.hpp"
#include "tetzero/net.hpp"
#include "tetzero/sdf.hpp"

namespace tetzero {

using ScalarField = std::function<double(const Vec3&)>;

struct McGrid {
  int resolution = 64;  // cells per axis
  Vec3 lo{-1, -1, -1};
  Vec3 hi{1, 1, 1};
};

/// Table-driven Marching Cubes over (R+1)^3 samples; vertices are shared
/// through edge keys, triangles face increasing field values.
Mesh marching_cubes(const ScalarField& f, const McGrid& g);

/// Same output restricted to blocks of `block` cells that may contain the
/// zero set: a block is skipped when every coarse corner has
/// |f| > lipschitz * half block diagonal.
Mesh marching_cubes_banded(const ScalarField& f, const McGrid& g, double lipschitz, int block = 8);

/// max |grad f| over a lattice of the box, scaled by `safety`.
double estimate_lipschitz(const Model& m, const McGrid& g, int samples = 64, double safety = 2.0);

/// Marching Cubes on the analytic SDF.
Mesh gt_mesh(const Shape& s, int resolution, const Vec3& lo = {-1, -1, -1}, const Vec3& hi = {1, 1, 1});

/// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

class TriangleBvh {
 public:
  explicit TriangleBvh(const Mesh& m);

  struct Hit {
    double dist2 = 0.0;
    uint32_t triangle = 0;
    Vec3 point;
  };
  Hit nearest(const Vec3& p) const;

 private:
  struct Node {
    Vec3 lo, hi;
    uint32_t first = 0, count = 0;  // leaf range when count > 0
    uint32_t left = 0, right = 0;
  };
  uint32_t build(uint32_t first, uint32_t count);

  const Mesh* mesh_;
  std::vector<uint32_t> order_;
  std::vector<Vec3> centroid_;
  std::vector<Node> nodes_;
};

struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<uint32_t> triangle;
};

/// n points distributed uniformly by area.
SurfaceSamples sample_mesh(const Mesh& m, std::size_t n, uint64_t seed);

/// 0.5 * (mean squared distance A->B + mean squared distance B->A), scene units^2.
double chamfer(const Mesh& a, const Mesh& b, std::size_t n, uint64_t seed = 0);

struct SelfConsistency {
  double ssdf = 0.0;
  double vsdf = 0.0;
  double ad = 0.0;  // degrees
  std::size_t ad_samples = 0;
  std::size_t ad_skipped = 0;
};

/// Distance in grid space from y to the nearest boundary of its region
/// (tetra faces at every level, hidden-neuron zero sets).
double region_boundary_distance(const Model& m, const Vec3& y);

SelfConsistency self_consistency(const Mesh& mesh, const Model& m, std::size_t n, uint64_t seed = 0,
                                 double boundary_eps = 1e-7);

struct MetricsReport {
  std::string name;
  double cd = -1.0;  // scene units^2; negative when not computed
  double ssdf = -1.0, vsdf = -1.0, ad = -1.0;
  std::size_t vertices = 0, triangles = 0;
  double seconds = 0.0;

  static std::string csv_header();
  std::string csv_row() const;  // CD reported x 1e6
  std::string to_json() const;
};

}  // namespace tetzero
