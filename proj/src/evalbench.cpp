#include "tetzero/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "tetzero/error.hpp"
#include "tetzero/parallel.hpp"

namespace tetzero {

namespace {

#include "mc_table.inc"

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Shared state of one extraction: lattice geometry plus the edge -> vertex map.
class McBuilder {
 public:
  explicit McBuilder(const McGrid& g) : g_(g), n_(uint64_t(g.resolution) + 1) {
    TZ_REQUIRE(g.resolution >= 2, invalid_argument, "marching cubes needs R >= 2, got ", g.resolution);
    for (int a = 0; a < 3; ++a)
      TZ_REQUIRE(g.hi[a] > g.lo[a], invalid_argument, "empty marching cubes box");
  }

  Vec3 point(int i, int j, int k) const {
    const double R = g_.resolution;
    return {g_.lo.x + (g_.hi.x - g_.lo.x) * (i / R), g_.lo.y + (g_.hi.y - g_.lo.y) * (j / R),
            g_.lo.z + (g_.hi.z - g_.lo.z) * (k / R)};
  }

  // Cell with lower corner (i,j,k) and its eight corner values.
  void cell(int i, int j, int k, const double v[8]) {
    int mask = 0;
    for (int c = 0; c < 8; ++c)
      if (v[c] < 0.0) mask |= 1 << c;
    if (mask == 0 || mask == 255) return;
    const int8_t* row = kTriTable[mask];
    for (int t = 0; row[t] >= 0; t += 3) {
      std::array<uint32_t, 3> tri;
      for (int s = 0; s < 3; ++s) tri[s] = vertex(i, j, k, row[t + s], v);
      if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
      // The table winds triangles toward decreasing values; flip to face +grad.
      mesh.triangles.push_back({tri[0], tri[2], tri[1]});
    }
  }

  Mesh mesh;

 private:
  uint32_t vertex(int i, int j, int k, int e, const double v[8]) {
    int a = kEdge[e][0], b = kEdge[e][1];
    // orient from the lower lattice point so both neighbors interpolate alike
    if (kCorner[a][0] + kCorner[a][1] + kCorner[a][2] > kCorner[b][0] + kCorner[b][1] + kCorner[b][2])
      std::swap(a, b);
    const int pi = i + kCorner[a][0], pj = j + kCorner[a][1], pk = k + kCorner[a][2];
    const int axis = kCorner[b][0] != kCorner[a][0] ? 0 : (kCorner[b][1] != kCorner[a][1] ? 1 : 2);
    const uint64_t key = ((uint64_t(pk) * n_ + pj) * n_ + pi) * 3 + axis;
    const auto [it, fresh] = ids_.try_emplace(key, uint32_t(mesh.vertices.size()));
    if (fresh) {
      const Vec3 p0 = point(pi, pj, pk);
      const Vec3 p1 = point(i + kCorner[b][0], j + kCorner[b][1], k + kCorner[b][2]);
      const double t = v[a] / (v[a] - v[b]);
      mesh.vertices.push_back(p0 + (p1 - p0) * t);
    }
    return it->second;
  }

  McGrid g_;
  uint64_t n_;
  std::unordered_map<uint64_t, uint32_t> ids_;
};

void evaluate_plane(const ScalarField& f, const McBuilder& b, int R, int k, std::vector<double>& out) {
  const std::size_t n = std::size_t(R) + 1;
  out.resize(n * n);
  parallel_for(n, [&](std::size_t j0, std::size_t j1) {
    for (std::size_t j = j0; j < j1; ++j)
      for (std::size_t i = 0; i < n; ++i) out[j * n + i] = f(b.point(int(i), int(j), k));
  }, 8);
}

}  // namespace

Mesh marching_cubes(const ScalarField& f, const McGrid& g) {
  McBuilder b(g);
  const int R = g.resolution;
  const std::size_t n = std::size_t(R) + 1;
  std::vector<double> lower, upper;
  evaluate_plane(f, b, R, 0, lower);
  double v[8];
  for (int k = 0; k < R; ++k) {
    evaluate_plane(f, b, R, k + 1, upper);
    for (int j = 0; j < R; ++j)
      for (int i = 0; i < R; ++i) {
        for (int c = 0; c < 8; ++c) {
          const auto& plane = kCorner[c][2] ? upper : lower;
          v[c] = plane[(j + kCorner[c][1]) * n + i + kCorner[c][0]];
        }
        b.cell(i, j, k, v);
      }
    std::swap(lower, upper);
  }
  return std::move(b.mesh);
}

Mesh marching_cubes_banded(const ScalarField& f, const McGrid& g, double lipschitz, int block) {
  TZ_REQUIRE(block >= 1 && lipschitz > 0, invalid_argument, "banded marching cubes needs block >= 1 and L > 0");
  McBuilder b(g);
  const int R = g.resolution;
  const int nb = (R + block - 1) / block;
  const std::size_t nc = std::size_t(nb) + 1;
  auto coarse_index = [&](int c) { return std::min(c * block, R); };
  std::vector<double> coarse(nc * nc * nc);
  parallel_for(nc * nc, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t i = 0; i < nc; ++i) {
        const int j = int(r % nc), k = int(r / nc);
        coarse[r * nc + i] = f(b.point(coarse_index(int(i)), coarse_index(j), coarse_index(k)));
      }
  }, 4);
  const Vec3 cell{(g.hi.x - g.lo.x) / R, (g.hi.y - g.lo.y) / R, (g.hi.z - g.lo.z) / R};
  const double reach = lipschitz * 0.5 * norm(cell * double(block));

  std::vector<double> vals;
  double v[8];
  for (int bk = 0; bk < nb; ++bk)
    for (int bj = 0; bj < nb; ++bj)
      for (int bi = 0; bi < nb; ++bi) {
        bool active = false;
        for (int c = 0; c < 8 && !active; ++c) {
          const std::size_t idx = (std::size_t(bk + kCorner[c][2]) * nc + bj + kCorner[c][1]) * nc + bi + kCorner[c][0];
          active = std::abs(coarse[idx]) <= reach;
        }
        if (!active) continue;
        const int i0 = bi * block, j0 = bj * block, k0 = bk * block;
        const int ni = std::min(block, R - i0) + 1, nj = std::min(block, R - j0) + 1, nk = std::min(block, R - k0) + 1;
        vals.resize(std::size_t(ni) * nj * nk);
        parallel_for(std::size_t(nj) * nk, [&](std::size_t r0, std::size_t r1) {
          for (std::size_t r = r0; r < r1; ++r)
            for (int i = 0; i < ni; ++i)
              vals[r * ni + i] = f(b.point(i0 + i, j0 + int(r % nj), k0 + int(r / nj)));
        }, 16);
        for (int k = 0; k + 1 < nk; ++k)
          for (int j = 0; j + 1 < nj; ++j)
            for (int i = 0; i + 1 < ni; ++i) {
              for (int c = 0; c < 8; ++c)
                v[c] = vals[(std::size_t(k + kCorner[c][2]) * nj + j + kCorner[c][1]) * ni + i + kCorner[c][0]];
              b.cell(i0 + i, j0 + j, k0 + k, v);
            }
      }
  return std::move(b.mesh);
}

double estimate_lipschitz(const Model& m, const McGrid& g, int samples, double safety) {
  double best = 0.0;
  for (int k = 0; k < samples; ++k)
    for (int j = 0; j < samples; ++j)
      for (int i = 0; i < samples; ++i) {
        const Vec3 x{g.lo.x + (g.hi.x - g.lo.x) * (i + 0.5) / samples, g.lo.y + (g.hi.y - g.lo.y) * (j + 0.5) / samples,
                     g.lo.z + (g.hi.z - g.lo.z) * (k + 0.5) / samples};
        best = std::max(best, norm(m.grad(x)));
      }
  return std::max(best * safety, 1e-12);
}

Mesh gt_mesh(const Shape& s, int resolution, const Vec3& lo, const Vec3& hi) {
  TZ_REQUIRE(resolution >= 16, invalid_argument, "ground-truth mesh needs resolution >= 16");
  return marching_cubes([&](const Vec3& x) { return sdf_eval(s, x); }, {resolution, lo, hi});
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (vertex, edge, face).
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && d4 - d3 >= 0 && d5 - d6 >= 0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double sum = va + vb + vc;
  if (!(sum > 0)) {
    // degenerate triangle: nearest of its sides
    auto seg = [&](const Vec3& s0, const Vec3& s1) {
      const Vec3 d = s1 - s0;
      const double dd = dot(d, d);
      return dd > 0 ? s0 + d * std::clamp(dot(p - s0, d) / dd, 0.0, 1.0) : s0;
    };
    Vec3 best = seg(a, b);
    for (const Vec3& q : {seg(b, c), seg(c, a)})
      if (dot(q - p, q - p) < dot(best - p, best - p)) best = q;
    return best;
  }
  return a + ab * (vb / sum) + ac * (vc / sum);
}

TriangleBvh::TriangleBvh(const Mesh& m) : mesh_(&m) {
  TZ_REQUIRE(!m.triangles.empty(), invalid_argument, "BVH over an empty mesh");
  const std::size_t n = m.triangles.size();
  order_.resize(n);
  centroid_.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    order_[t] = uint32_t(t);
    const auto& f = m.triangles[t];
    centroid_[t] = (m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) * (1.0 / 3.0);
  }
  nodes_.reserve(2 * n / 2 + 1);
  build(0, uint32_t(n));
}

uint32_t TriangleBvh::build(uint32_t first, uint32_t count) {
  const auto id = uint32_t(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo{INFINITY, INFINITY, INFINITY}, hi{-INFINITY, -INFINITY, -INFINITY};
  Vec3 clo = lo, chi = hi;
  for (uint32_t i = first; i < first + count; ++i) {
    const auto& f = mesh_->triangles[order_[i]];
    for (uint32_t v : f)
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], mesh_->vertices[v][a]);
        hi[a] = std::max(hi[a], mesh_->vertices[v][a]);
      }
    for (int a = 0; a < 3; ++a) {
      clo[a] = std::min(clo[a], centroid_[order_[i]][a]);
      chi[a] = std::max(chi[a], centroid_[order_[i]][a]);
    }
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  if (count <= 4) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (chi[a] - clo[a] > chi[axis] - clo[axis]) axis = a;
  const uint32_t mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](uint32_t x, uint32_t y) { return centroid_[x][axis] < centroid_[y][axis]; });
  const uint32_t left = build(first, mid - first);
  const uint32_t right = build(mid, first + count - mid);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

TriangleBvh::Hit TriangleBvh::nearest(const Vec3& p) const {
  auto box_dist2 = [&](const Node& n) {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double e = std::max({n.lo[a] - p[a], 0.0, p[a] - n.hi[a]});
      d += e * e;
    }
    return d;
  };
  Hit best;
  best.dist2 = INFINITY;
  uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top) {
    const Node& n = nodes_[stack[--top]];
    if (box_dist2(n) >= best.dist2) continue;
    if (n.count) {
      for (uint32_t i = n.first; i < n.first + n.count; ++i) {
        const auto& f = mesh_->triangles[order_[i]];
        const Vec3 q = closest_point_on_triangle(p, mesh_->vertices[f[0]], mesh_->vertices[f[1]], mesh_->vertices[f[2]]);
        const double d = dot(q - p, q - p);
        if (d < best.dist2 || (d == best.dist2 && order_[i] < best.triangle)) best = {d, order_[i], q};
      }
      continue;
    }
    const double dl = box_dist2(nodes_[n.left]), dr = box_dist2(nodes_[n.right]);
    // push the farther child first so the nearer one is visited next
    if (dl < dr) {
      stack[top++] = n.right;
      stack[top++] = n.left;
    } else {
      stack[top++] = n.left;
      stack[top++] = n.right;
    }
  }
  return best;
}

SurfaceSamples sample_mesh(const Mesh& m, std::size_t n, uint64_t seed) {
  TZ_REQUIRE(!m.triangles.empty(), invalid_argument, "cannot sample an empty mesh");
  std::vector<double> cum(m.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) cum[t] = total += m.area(t);
  TZ_REQUIRE(total > 0, invalid_argument, "mesh has zero area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SurfaceSamples s;
  s.points.reserve(n);
  s.triangle.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = u(rng) * total;
    auto t = std::size_t(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin());
    t = std::min(t, cum.size() - 1);
    const auto& f = m.triangles[t];
    const double r1 = std::sqrt(u(rng)), r2 = u(rng);
    s.points.push_back(m.vertices[f[0]] * (1 - r1) + m.vertices[f[1]] * (r1 * (1 - r2)) + m.vertices[f[2]] * (r1 * r2));
    s.triangle.push_back(uint32_t(t));
  }
  return s;
}

double chamfer(const Mesh& a, const Mesh& b, std::size_t n, uint64_t seed) {
  TZ_REQUIRE(!a.empty() && !b.empty(), invalid_argument, "chamfer distance needs two nonempty meshes");
  auto one_way = [n](const Mesh& from, const Mesh& to, uint64_t s) {
    const SurfaceSamples pts = sample_mesh(from, n, s);
    const TriangleBvh bvh(to);
    std::vector<double> d(n);
    parallel_for(n, [&](std::size_t i0, std::size_t i1) {
      for (std::size_t i = i0; i < i1; ++i) d[i] = bvh.nearest(pts.points[i]).dist2;
    });
    double sum = 0.0;
    for (double x : d) sum += x;
    return sum / double(n);
  };
  return 0.5 * (one_way(a, b, seed) + one_way(b, a, seed + 1));
}

double region_boundary_distance(const Model& m, const Vec3& y) {
  const Encoder& enc = m.encoder;
  const Grid& grid = m.grid();
  double best = INFINITY;
  RegionIndicator cell(grid.levels());
  for (int l = 0; l < grid.levels(); ++l) {
    Barycentric w;
    cell[l] = grid.locate_id(y, l, &w);
    const auto dw = kuhn_weight_gradients(cell[l].tetra, grid.resolution(l));
    for (int i = 0; i < 4; ++i) best = std::min(best, std::max(w[i], 0.0) / norm(dw[i]));
  }
  // Jacobians of every hidden pre-activation on the located region.
  const CellAffineMap A = enc.cell_affine(cell);
  std::vector<double> z(enc.output_dim());
  enc.encode(y, z);
  std::vector<Vec3> J(A.dim);
  std::vector<double> val(z);
  for (int r = 0; r < A.dim; ++r) J[r] = {A.A[3 * r], A.A[3 * r + 1], A.A[3 * r + 2]};
  const auto& layers = m.mlp.layers();
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    const DenseLayer& L = layers[k];
    std::vector<Vec3> Jn(L.out);
    std::vector<double> vn(L.out);
    for (int o = 0; o < L.out; ++o) {
      double s = L.b[o];
      for (int i = 0; i < L.in; ++i) {
        Jn[o] += J[i] * L.W[std::size_t(o) * L.in + i];
        s += L.W[std::size_t(o) * L.in + i] * val[i];
      }
      const double gn = norm(Jn[o]);
      if (gn > 0) best = std::min(best, std::abs(s) / gn);
      if (s <= 0) {
        Jn[o] = Vec3{};
        s = 0;
      }
      vn[o] = s;
    }
    J = std::move(Jn);
    val = std::move(vn);
  }
  return best;
}

SelfConsistency self_consistency(const Mesh& mesh, const Model& m, std::size_t n, uint64_t seed,
                                 double boundary_eps) {
  TZ_REQUIRE(!mesh.empty(), invalid_argument, "self-consistency needs a nonempty mesh");
  SelfConsistency out;
  const SurfaceSamples s = sample_mesh(mesh, n, seed);
  std::vector<double> fs(n), ang(n);
  std::vector<char> used(n);
  parallel_for(n, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      const Vec3& x = s.points[i];
      fs[i] = std::abs(m.eval(x));
      const Vec3 nt = mesh.normal(s.triangle[i]);
      used[i] = norm(nt) > 0 && region_boundary_distance(m, m.input.apply(x)) >= boundary_eps;
      if (!used[i]) continue;
      const Vec3 g = m.grad(x);
      const double gn = norm(g);
      if (!(gn > 0)) {
        used[i] = 0;
        continue;
      }
      const double c = std::clamp(dot(nt, g) / (norm(nt) * gn), -1.0, 1.0);
      ang[i] = std::acos(c) * 180.0 / std::numbers::pi;
    }
  }, 256);
  double sf = 0.0, sa = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sf += fs[i];
    if (used[i]) {
      sa += ang[i];
      ++out.ad_samples;
    } else {
      ++out.ad_skipped;
    }
  }
  out.ssdf = sf / double(n);
  out.ad = out.ad_samples ? sa / double(out.ad_samples) : 0.0;
  std::vector<double> fv(mesh.vertices.size());
  parallel_for(fv.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) fv[i] = std::abs(m.eval(mesh.vertices[i]));
  }, 256);
  double sv = 0.0;
  for (double v : fv) sv += v;
  out.vsdf = fv.empty() ? 0.0 : sv / double(fv.size());
  return out;
}

std::string MetricsReport::csv_header() { return "name,cd_x1e6,ssdf,vsdf,ad_deg,vertices,triangles,seconds"; }

std::string MetricsReport::csv_row() const {
  std::ostringstream os;
  os.precision(9);
  auto opt = [&](double v) {
    if (v >= 0) os << v;
  };
  os << name << ',';
  opt(cd >= 0 ? cd * 1e6 : -1.0);
  os << ',';
  opt(ssdf);
  os << ',';
  opt(vsdf);
  os << ',';
  opt(ad);
  os << ',' << vertices << ',' << triangles << ',' << seconds;
  return os.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  if (cd >= 0) j["cd"] = cd, j["cd_x1e6"] = cd * 1e6;
  if (ssdf >= 0) j["ssdf"] = ssdf;
  if (vsdf >= 0) j["vsdf"] = vsdf;
  if (ad >= 0) j["ad_deg"] = ad;
  j["vertices"] = vertices;
  j["triangles"] = triangles;
  j["seconds"] = seconds;
  return j.dump(2);
}

}  // namespace tetzero
