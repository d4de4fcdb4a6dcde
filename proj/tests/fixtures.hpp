#pragma once

// Small hand-built models shared by the extraction and metric tests.

#include <array>
#include <random>
#include <vector>

#include "tetzero/mesh.hpp"
#include "tetzero/net.hpp"

namespace fixtures {

using namespace tetzero;

// Features equal to the lattice vertex coordinates, so every level encodes y
// itself and z = (y, y, ...).
inline Model identity_model(std::vector<int> res, std::vector<int> widths) {
  Grid g(GridConfig::explicit_levels(res));
  Encoder e(g, {3, 19});
  e.fill_from_vertices([&](int l, const Int3& v, double* row) {
    for (int k = 0; k < 3; ++k) row[k] = v[k] / double(g.resolution(l));
  });
  Mlp m(e.output_dim(), widths);
  return Model(e, m);
}

// Random net on the single-cube grid, output bias shifted so the zero set
// passes through the cube center.
inline Model random_small(uint64_t seed) {
  static const std::vector<std::vector<int>> shapes{{6}, {3, 3}, {2, 2, 2}, {4, 2}, {5}, {2, 4}};
  Grid g(GridConfig::explicit_levels({1}));
  Encoder e(g, {3, 19});
  std::mt19937_64 rng(seed);
  e.init_uniform(rng, 1.0);
  Mlp m(e.output_dim(), shapes[seed % shapes.size()]);
  m.init_uniform(rng);
  Model model(e, m);
  model.mlp.layers().back().b[0] -= model.eval_grid({0.5, 0.5, 0.5});
  return model;
}

inline void set_neuron(Model& m, int layer, int o, std::vector<double> w, double b) {
  auto& L = m.mlp.layers()[layer];
  std::copy(w.begin(), w.end(), L.W.begin() + std::size_t(o) * L.in);
  L.b[o] = b;
}

// f = sum_i relu(n_i . (y - c) + delta_i) - r over the four tetrahedral
// directions: convex, positive away from c, so the zero set is a closed
// polytope with no two hidden planes coinciding.
inline Model tetra_norm(std::vector<int> res, Vec3 c, double r) {
  const int L = int(res.size());
  const std::array<Vec3, 4> n{{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}};
  const std::array<double, 4> delta{0.011, -0.007, 0.003, -0.013};
  Model m = identity_model(res, {4});
  for (int i = 0; i < 4; ++i) {
    std::vector<double> w(3 * L, 0.0);
    for (int k = 0; k < 3; ++k) w[k] = n[i][k];
    set_neuron(m, 0, i, w, delta[i] - dot(n[i], c));
  }
  set_neuron(m, 1, 0, std::vector<double>(4, 1.0), -r);
  return m;
}

inline double signed_volume(const Mesh& m) {
  double v = 0.0;
  for (const auto& f : m.triangles)
    v += dot(m.vertices[f[0]], cross(m.vertices[f[1]], m.vertices[f[2]])) / 6.0;
  return v;
}

}  // namespace fixtures
