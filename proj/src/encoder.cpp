#include "tetzero/encoder.hpp"

#include <algorithm>
#include <map>

#include "tetzero/error.hpp"

namespace tetzero {

Encoder::Encoder(const Grid& grid, const EncoderConfig& cfg) : grid_(grid), cfg_(cfg) {
  TZ_REQUIRE(cfg.features >= 1, invalid_argument, "feature dimension must be >= 1");
  TZ_REQUIRE(cfg.log2_table >= 1 && cfg.log2_table <= 30, invalid_argument,
             "log2 table size must be in [1, 30], got ", cfg.log2_table);
  const uint64_t hashed_rows = uint64_t(1) << cfg.log2_table;
  for (int l = 0; l < grid.levels(); ++l) {
    FeatureTable t;
    t.resolution = grid.resolution(l);
    const uint64_t n1 = uint64_t(t.resolution) + 1;
    t.dense = n1 * n1 * n1 <= hashed_rows;
    t.rows = static_cast<uint32_t>(t.dense ? n1 * n1 * n1 : hashed_rows);
    t.data.assign(std::size_t(t.rows) * cfg.features, 0.0);
    tables_.push_back(std::move(t));
  }
}

void Encoder::init_uniform(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& t : tables_)
    for (double& v : t.data) v = u(rng);
}

uint32_t Encoder::hash_vertex(const Int3& v, int level) const {
  const FeatureTable& t = tables_[level];
  for (int k = 0; k < 3; ++k)
    TZ_REQUIRE(v[k] >= 0 && v[k] <= t.resolution, domain, "lattice vertex component ", v[k],
               " outside [0, ", t.resolution, "]");
  if (t.dense) {
    const uint32_t n1 = uint32_t(t.resolution) + 1;
    return uint32_t(v[0]) + n1 * (uint32_t(v[1]) + n1 * uint32_t(v[2]));
  }
  const uint32_t h = (uint32_t(v[0]) * kHashPrimes[0]) ^ (uint32_t(v[1]) * kHashPrimes[1]) ^
                     (uint32_t(v[2]) * kHashPrimes[2]);
  return h % t.rows;
}

void Encoder::sample(const Vec3& x, std::span<LevelSample> out) const {
  TZ_REQUIRE(int(out.size()) == levels(), invalid_argument, "trace buffer has wrong size");
  for (int l = 0; l < levels(); ++l) {
    LevelSample& s = out[l];
    s.id = grid_.locate_id(x, l, &s.w);
    const auto lv = lattice_vertices(s.id);
    for (int i = 0; i < 4; ++i) s.rows[i] = hash_vertex(lv[i], l);
  }
}

void Encoder::interpolate(std::span<const LevelSample> s, std::span<double> z) const {
  const int d = cfg_.features;
  for (int l = 0; l < levels(); ++l) {
    double* zl = z.data() + l * d;
    std::fill(zl, zl + d, 0.0);
    for (int i = 0; i < 4; ++i) {
      const double* h = row(l, s[l].rows[i]);
      for (int k = 0; k < d; ++k) zl[k] += s[l].w[i] * h[k];
    }
  }
}

void Encoder::encode(const Vec3& x, std::span<double> z, std::span<LevelSample> trace) const {
  TZ_REQUIRE(int(z.size()) == output_dim(), invalid_argument, "feature buffer has wrong size");
  std::array<LevelSample, 16> local;
  std::vector<LevelSample> heap;
  std::span<LevelSample> s = trace;
  if (s.empty()) {
    if (levels() <= 16) {
      s = std::span<LevelSample>(local.data(), levels());
    } else {
      heap.resize(levels());
      s = heap;
    }
  }
  sample(x, s);
  interpolate(s, z);
}

std::vector<double> Encoder::encode(const Vec3& x) const {
  std::vector<double> z(output_dim());
  encode(x, z);
  return z;
}

CellAffineMap Encoder::cell_affine(const RegionIndicator& cell) const {
  TZ_REQUIRE(int(cell.size()) == levels(), invalid_argument, "region indicator has ", cell.size(),
             " levels, encoder has ", levels());
  const int d = cfg_.features;
  CellAffineMap m;
  m.dim = output_dim();
  m.A.assign(std::size_t(m.dim) * 3, 0.0);
  m.b.assign(m.dim, 0.0);
  for (int l = 0; l < levels(); ++l) {
    const TetraRef t = grid_.tetra(l, cell[l]);
    const auto lv = lattice_vertices(cell[l]);
    const Mat3 cinv =
        inverse(Mat3::from_columns(t.v[1] - t.v[0], t.v[2] - t.v[0], t.v[3] - t.v[0]));
    std::array<const double*, 4> g;
    for (int i = 0; i < 4; ++i) g[i] = row(l, hash_vertex(lv[i], l));
    for (int k = 0; k < d; ++k) {
      const Vec3 gk{g[1][k] - g[0][k], g[2][k] - g[0][k], g[3][k] - g[0][k]};
      // row of G C^{-1}
      const Vec3 a = cinv.transposed() * gk;
      const int r = l * d + k;
      m.A[3 * r + 0] = a.x;
      m.A[3 * r + 1] = a.y;
      m.A[3 * r + 2] = a.z;
      m.b[r] = g[0][k] - dot(a, t.v[0]);
    }
  }
  return m;
}

std::vector<RowGradient> Encoder::backprop_features(const Vec3& x,
                                                    std::span<const double> upstream) const {
  TZ_REQUIRE(int(upstream.size()) == output_dim(), invalid_argument, "upstream has wrong size");
  if (std::all_of(upstream.begin(), upstream.end(), [](double v) { return v == 0.0; })) return {};
  const int d = cfg_.features;
  std::vector<LevelSample> s(levels());
  sample(x, s);
  std::map<std::pair<int, uint32_t>, std::vector<double>> acc;
  for (int l = 0; l < levels(); ++l)
    for (int i = 0; i < 4; ++i) {
      if (s[l].w[i] == 0.0) continue;
      auto& g = acc[{l, s[l].rows[i]}];
      g.resize(d, 0.0);
      for (int k = 0; k < d; ++k) g[k] += s[l].w[i] * upstream[l * d + k];
    }
  std::vector<RowGradient> out;
  for (auto& [key, g] : acc) out.push_back({key.first, key.second, std::move(g)});
  return out;
}

}  // namespace tetzero
