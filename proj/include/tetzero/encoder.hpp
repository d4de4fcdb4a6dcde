#pragma once

// Per-level feature tables and barycentric interpolation over the
// multi-resolution tetrahedral grid.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tetzero/grid.hpp"

namespace tetzero {

inline constexpr uint32_t kHashPrimes[3] = {1u, 2654435761u, 805459861u};

struct EncoderConfig {
  int features = 2;     // d
  int log2_table = 19;  // hashed levels use T = 2^log2_table rows
};

struct FeatureTable {
  int resolution = 0;
  uint32_t rows = 0;
  bool dense = false;
  std::vector<double> data;  // rows * d, row-major
};

/// Where one level's interpolation reads from: table rows of the four
/// tetra vertices and their barycentric weights.
struct LevelSample {
  TetraId id;
  std::array<uint32_t, 4> rows{};
  Barycentric w{};
};

/// z = A x + b on one polyhedral cell; A is (dL x 3) row-major.
struct CellAffineMap {
  int dim = 0;
  std::vector<double> A;
  std::vector<double> b;
};

struct RowGradient {
  int level = 0;
  uint32_t row = 0;
  std::vector<double> g;  // d entries
};

class Encoder {
 public:
  Encoder(const Grid& grid, const EncoderConfig& cfg);

  const Grid& grid() const { return grid_; }
  const EncoderConfig& config() const { return cfg_; }
  int features() const { return cfg_.features; }
  int levels() const { return grid_.levels(); }
  int output_dim() const { return cfg_.features * grid_.levels(); }

  FeatureTable& table(int level) { return tables_[level]; }
  const FeatureTable& table(int level) const { return tables_[level]; }
  double* row(int level, uint32_t r) { return tables_[level].data.data() + std::size_t(r) * cfg_.features; }
  const double* row(int level, uint32_t r) const {
    return tables_[level].data.data() + std::size_t(r) * cfg_.features;
  }

  /// Uniform in [-scale, scale], level by level, row-major.
  void init_uniform(std::mt19937_64& rng, double scale = 1e-4);
  /// Set every feature row from a function of the lattice vertex (dense levels only).
  template <class F>
  void fill_from_vertices(F&& f);

  uint32_t hash_vertex(const Int3& v, int level) const;

  void sample(const Vec3& x, std::span<LevelSample> out) const;
  void encode(const Vec3& x, std::span<double> z, std::span<LevelSample> trace = {}) const;
  std::vector<double> encode(const Vec3& x) const;

  /// Interpolation from explicit per-level weights on fixed tetrahedra.
  void interpolate(std::span<const LevelSample> s, std::span<double> z) const;

  CellAffineMap cell_affine(const RegionIndicator& cell) const;
  /// A' of the cell located for x (tie-break cell on boundaries).
  CellAffineMap grad_x(const Vec3& x) const { return cell_affine(grid_.region_indicator(x)); }

  /// d<upstream, tau(x)>/dH, merged over hash collisions; empty if upstream == 0.
  std::vector<RowGradient> backprop_features(const Vec3& x, std::span<const double> upstream) const;

 private:
  Grid grid_;
  EncoderConfig cfg_;
  std::vector<FeatureTable> tables_;
};

template <class F>
void Encoder::fill_from_vertices(F&& f) {
  for (int l = 0; l < levels(); ++l) {
    const int n = grid_.resolution(l);
    for (int z = 0; z <= n; ++z)
      for (int y = 0; y <= n; ++y)
        for (int x = 0; x <= n; ++x) {
          const Int3 v{x, y, z};
          f(l, v, row(l, hash_vertex(v, l)));
        }
  }
}

}  // namespace tetzero
