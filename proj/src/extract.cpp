#include "tetzero/extract.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "tetzero/error.hpp"

namespace tetzero {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

uint64_t edge_key(uint32_t a, uint32_t b) {
  return (uint64_t(std::min(a, b)) << 32) | std::max(a, b);
}

// Support of a tag: lattice points spanning the face the vertex lies in.
int support(const LevelTag& t, std::array<Int3, 4>& out) {
  const auto lv = lattice_vertices(t.id);
  int n = 0;
  for (int i = 0; i < 4; ++i)
    if (t.mask & (1u << i)) out[n++] = lv[i];
  return n;
}

int union_size(const LevelTag& a, const LevelTag& b) {
  std::array<Int3, 4> sa, sb;
  const int na = support(a, sa), nb = support(b, sb);
  int n = na;
  for (int j = 0; j < nb; ++j)
    if (std::find(sa.begin(), sa.begin() + na, sb[j]) == sa.begin() + na) ++n;
  return n;
}

// Mask of `id` covering the points in u, or -1 if some point is not a vertex.
int cover_mask(const TetraId& id, const std::array<Int3, 8>& u, int n) {
  const auto lv = lattice_vertices(id);
  int mask = 0;
  for (int j = 0; j < n; ++j) {
    const auto it = std::find(lv.begin(), lv.end(), u[j]);
    if (it == lv.end()) return -1;
    mask |= 1 << int(it - lv.begin());
  }
  return mask;
}

bool in_domain(const TetraId& id, int n) {
  for (int c : id.anchor)
    if (c < 0 || c >= n) return false;
  return true;
}

bool intersects(const std::vector<TetraId>& a, const std::vector<TetraId>& b) {
  for (const TetraId& x : a)
    if (std::find(b.begin(), b.end(), x) != b.end()) return true;
  return false;
}

uint64_t mix(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Hash128 {
  uint64_t lo = 0, hi = 0;
  void add(uint64_t x) {
    lo += mix(x);
    hi += mix(x ^ 0xD6E8FEB86659FD93ull);
  }
  friend auto operator<=>(const Hash128&, const Hash128&) = default;
};

uint64_t tetra_code(int level, const TetraId& id) {
  uint64_t h = uint64_t(level) << 56;
  h ^= uint64_t(uint32_t(id.anchor[0])) << 35 ^ uint64_t(uint32_t(id.anchor[1])) << 14;
  h ^= uint64_t(uint32_t(id.anchor[2])) << 3 ^ id.tetra;
  return mix(h);
}

Hash128 region_hash(const RegionKey& r) {
  Hash128 h;
  for (std::size_t l = 0; l < r.grid.size(); ++l) h.add(tetra_code(int(l), r.grid[l]));
  for (std::size_t i = 0; i < r.relu.size(); ++i) h.add((uint64_t(i) << 2 | (r.relu[i] > 0 ? 1 : 2)) + (1ull << 62));
  return h;
}

}  // namespace

SubdivisionState::SubdivisionState(const Model& model, const Skeleton& skeleton, const ExtractConfig& cfg)
    : model_(&model), cfg_(cfg), L_(model.grid().levels()) {
  TZ_REQUIRE(cfg.eps_s > 0 && cfg.eps_f > 0 && cfg.eps_b > 0, invalid_argument, "tolerances must be positive");
  words_ = (neurons() + 31) / 32;
  const std::size_t n = skeleton.vertices.size();
  pos_.reserve(n);
  tags_.reserve(n * L_);
  signs_.reserve(n * words_);
  f_.reserve(n);
  const auto tags = annotate(skeleton, model.grid(), cfg.eps_b);
  const std::vector<int> none;
  for (std::size_t v = 0; v < n; ++v) add_vertex(skeleton.vertices[v], tags.data() + v * L_, none, 0);
  edges_ = skeleton.edges;
}

void SubdivisionState::set_sign(uint32_t v, int neuron, int s) {
  uint64_t& w = signs_[std::size_t(v) * words_ + (neuron >> 5)];
  const int sh = 2 * (neuron & 31);
  w &= ~(uint64_t(3) << sh);
  w |= uint64_t(s > 0 ? 1 : (s < 0 ? 2 : 0)) << sh;
}

uint32_t SubdivisionState::add_vertex(const Vec3& y, const LevelTag* tags, const std::vector<int>& fixed,
                                      int upto) {
  TZ_REQUIRE(pos_.size() < std::numeric_limits<uint32_t>::max(), blow_up, "vertex count exceeds 32-bit indices");
  thread_local std::vector<double> pre;
  pre.resize(neurons());
  const double f = model_->eval_grid(y, pre);
  TZ_REQUIRE(std::isfinite(f), non_finite, "network is not finite at a complex vertex");
  const auto v = uint32_t(pos_.size());
  pos_.push_back(y);
  tags_.insert(tags_.end(), tags, tags + L_);
  signs_.resize(signs_.size() + words_, 0);
  f_.push_back(f);
  for (int i = 0; i < neurons(); ++i) set_sign(v, i, i < upto ? fixed[i] : sign_of(pre[i], cfg_.eps_s));
  return v;
}

double SubdivisionState::preact(uint32_t v, int g) const {
  if (g == neurons() - 1) return f_[v];
  return model_->neuron_preact_grid(pos_[v], g);
}

std::size_t SubdivisionState::split_edges(int g) {
  TZ_REQUIRE(g >= 0 && g <= processed_ && g < neurons(), invalid_argument, "neuron ", g,
             " cannot be split before earlier neurons are processed");
  const Grid& grid = model_->grid();
  const std::size_t n_edges = edges_.size();
  std::vector<double> memo(pos_.size(), std::numeric_limits<double>::quiet_NaN());
  auto d = [&](uint32_t v) {
    if (std::isnan(memo[v])) memo[v] = preact(v, g);
    return memo[v];
  };
  std::vector<int> fixed(g + 1);
  std::vector<LevelTag> tags(L_);
  std::size_t inserted = 0;
  for (std::size_t e = 0; e < n_edges; ++e) {
    const auto [a, b] = edges_[e];
    const int sa = sign(a, g), sb = sign(b, g);
    if (sa * sb >= 0) continue;
    const double d0 = d(a), d1 = d(b);
    const double w = std::abs(d0) / std::abs(d0 - d1);
    TZ_REQUIRE(std::isfinite(w) && w >= 0.0 && w <= 1.0, non_finite, "split weight ", w, " on edge (", a, ",", b,
               ") for neuron ", g);
    const Vec3 pa = pos_[a], pb = pos_[b];
    const Vec3 y = pa * (1.0 - w) + pb * w;

    // Earlier signs: the open edge lies in one closed region, so a nonzero
    // endpoint sign holds on the whole interior.
    for (int i = 0; i < g; ++i) {
      const int x = sign(a, i), z = sign(b, i);
      TZ_REQUIRE(x * z >= 0, internal, "edge (", a, ",", b, ") crosses neuron ", i, " which is already processed");
      fixed[i] = x != 0 ? x : z;
    }
    fixed[g] = 0;

    // The interior of the edge lies in the relative interior of the face
    // spanned by both endpoints' supports.
    for (int l = 0; l < L_; ++l) {
      const LevelTag& ta = tags_[std::size_t(a) * L_ + l];
      const LevelTag& tb = tags_[std::size_t(b) * L_ + l];
      std::array<Int3, 8> u;
      std::array<Int3, 4> s;
      int n = support(ta, s);
      std::copy(s.begin(), s.begin() + n, u.begin());
      const int nb = support(tb, s);
      for (int j = 0; j < nb; ++j)
        if (std::find(u.begin(), u.begin() + n, s[j]) == u.begin() + n) u[n++] = s[j];
      TZ_REQUIRE(n <= 4, internal, "edge (", a, ",", b, ") endpoints share no tetra at level ", l);
      TetraId id = grid.locate_id(y, l);
      int mask = cover_mask(id, u, n);
      if (mask < 0) {
        for (const TetraId& c : level_neighbors(ta)) {
          mask = cover_mask(c, u, n);
          if (mask >= 0) {
            id = c;
            break;
          }
        }
      }
      TZ_REQUIRE(mask >= 0, internal, "no level-", l, " tetra contains edge (", a, ",", b, ")");
      tags[l] = LevelTag{id, uint8_t(mask)};
    }

    const uint32_t v = add_vertex(y, tags.data(), fixed, g + 1);
    edges_[e] = {a, v};
    edges_.push_back({v, b});
    ++inserted;
  }
  return inserted;
}

bool SubdivisionState::share_region(uint32_t a, uint32_t b, int g) const {
  for (int i = 0; i < g; ++i)
    if (sign(a, i) * sign(b, i) < 0) return false;
  for (int l = 0; l < L_; ++l) {
    const LevelTag& ta = tags_[std::size_t(a) * L_ + l];
    const LevelTag& tb = tags_[std::size_t(b) * L_ + l];
    if (ta.id == tb.id) continue;
    if (!intersects(level_neighbors(ta), level_neighbors(tb))) return false;
  }
  return true;
}

std::size_t SubdivisionState::connect_region_edges(int g) {
  TZ_REQUIRE(g >= 0 && g <= processed_ && g < neurons(), invalid_argument, "neuron ", g,
             " cannot be connected before earlier neurons are processed");
  std::vector<uint32_t> zeros;
  std::vector<char> is_zero(pos_.size(), 0);
  for (uint32_t v = 0; v < pos_.size(); ++v)
    if (sign(v, g) == 0) {
      zeros.push_back(v);
      is_zero[v] = 1;
    }
  if (zeros.size() < 2) return 0;

  std::unordered_set<uint64_t> existing;
  for (const auto& [a, b] : edges_)
    if (is_zero[a] && is_zero[b]) existing.insert(edge_key(a, b));

  // Candidates must share a finest-level tetra; bucket on it, then test
  // the full condition per pair.
  std::vector<std::pair<TetraId, uint32_t>> buckets;
  for (uint32_t v : zeros)
    for (const TetraId& t : level_neighbors(tags_[std::size_t(v) * L_ + L_ - 1])) buckets.emplace_back(t, v);
  std::sort(buckets.begin(), buckets.end());
  std::vector<uint64_t> pairs;
  for (std::size_t i = 0; i < buckets.size();) {
    std::size_t j = i;
    while (j < buckets.size() && buckets[j].first == buckets[i].first) ++j;
    for (std::size_t p = i; p < j; ++p)
      for (std::size_t q = p + 1; q < j; ++q) pairs.push_back(edge_key(buckets[p].second, buckets[q].second));
    i = j;
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::size_t added = 0;
  for (uint64_t key : pairs) {
    if (existing.count(key)) continue;
    const auto a = uint32_t(key >> 32), b = uint32_t(key);
    if (!share_region(a, b, g)) continue;
    // A second shared zero puts both on one 2-face of the common region:
    // an earlier folded hyperplane or a grid plane at some level.
    bool second = false;
    for (int i = 0; i < g && !second; ++i) second = sign(a, i) == 0 && sign(b, i) == 0;
    for (int l = 0; l < L_ && !second; ++l)
      second = union_size(tags_[std::size_t(a) * L_ + l], tags_[std::size_t(b) * L_ + l]) <= 3;
    if (!second) continue;
    edges_.push_back({a, b});
    ++added;
  }
  return added;
}

PassStats SubdivisionState::process_next() {
  TZ_REQUIRE(processed_ < neurons(), invalid_argument, "all neurons already processed");
  const auto t0 = Clock::now();
  PassStats s;
  s.neuron = processed_;
  s.split = split_edges(processed_);
  s.connected = connect_region_edges(processed_);
  ++processed_;
  s.vertices = pos_.size();
  s.edges = edges_.size();
  s.seconds = seconds_since(t0);
  return s;
}

std::vector<RegionKey> SubdivisionState::neighbor_regions(uint32_t v, int upto, bool in_domain_only) const {
  TZ_REQUIRE(upto >= 0 && upto <= neurons(), invalid_argument, "neuron prefix out of range");
  std::vector<std::vector<TetraId>> per_level(L_);
  std::size_t total = 1;
  for (int l = 0; l < L_; ++l) {
    per_level[l] = level_neighbors(tags_[std::size_t(v) * L_ + l]);
    if (in_domain_only) {
      const int n = model_->grid().resolution(l);
      std::erase_if(per_level[l], [n](const TetraId& t) { return !in_domain(t, n); });
    }
    total *= per_level[l].size();
  }
  std::vector<int> zero_idx;
  std::vector<int8_t> base(upto);
  for (int i = 0; i < upto; ++i) {
    base[i] = int8_t(sign(v, i));
    if (base[i] == 0) zero_idx.push_back(i);
  }
  TZ_REQUIRE(zero_idx.size() < 40 && (total << zero_idx.size()) <= cfg_.max_neighbors, blow_up, "vertex ", v,
             " has ", total, " grid neighbors and ", zero_idx.size(), " zero signs; region set exceeds ",
             cfg_.max_neighbors);
  std::vector<RegionKey> out;
  if (total == 0) return out;
  out.reserve(total << zero_idx.size());
  std::vector<std::size_t> digit(L_, 0);
  RegionKey key;
  key.grid.resize(L_);
  for (std::size_t c = 0; c < total; ++c) {
    for (int l = 0; l < L_; ++l) key.grid[l] = per_level[l][digit[l]];
    for (uint64_t m = 0; m < (uint64_t(1) << zero_idx.size()); ++m) {
      key.relu = base;
      for (std::size_t z = 0; z < zero_idx.size(); ++z) key.relu[zero_idx[z]] = (m >> z) & 1 ? -1 : 1;
      out.push_back(key);
    }
    for (int l = L_ - 1; l >= 0; --l) {
      if (++digit[l] < per_level[l].size()) break;
      digit[l] = 0;
    }
  }
  return out;
}

RegionAffine region_affine(const Model& model, const RegionKey& region) {
  const auto& layers = model.mlp.layers();
  TZ_REQUIRE(int(region.relu.size()) >= model.mlp.hidden_neurons(), invalid_argument,
             "region sign pattern shorter than the hidden layer count");
  const CellAffineMap cell = model.encoder.cell_affine(region.grid);
  std::vector<double> J = cell.A, c = cell.b;
  int g = 0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const DenseLayer& layer = layers[k];
    std::vector<double> Jn(std::size_t(layer.out) * 3, 0.0), cn(layer.b);
    for (int o = 0; o < layer.out; ++o) {
      const double* w = layer.W.data() + std::size_t(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        for (int a = 0; a < 3; ++a) Jn[3 * o + a] += w[i] * J[3 * i + a];
        cn[o] += w[i] * c[i];
      }
    }
    if (k + 1 < layers.size()) {
      for (int o = 0; o < layer.out; ++o)
        if (region.relu[g + o] <= 0) {
          Jn[3 * o] = Jn[3 * o + 1] = Jn[3 * o + 2] = 0.0;
          cn[o] = 0.0;
        }
      g += layer.out;
    }
    J = std::move(Jn);
    c = std::move(cn);
  }
  return {{J[0], J[1], J[2]}, c[0]};
}

ZeroSet zero_set(const SubdivisionState& state, double eps_f) {
  ZeroSet zs;
  std::vector<char> in(state.vertex_count(), 0);
  for (uint32_t v = 0; v < state.vertex_count(); ++v)
    if (std::abs(state.value(v)) <= eps_f) {
      zs.vertices.push_back(v);
      in[v] = 1;
    }
  for (const auto& e : state.edges())
    if (in[e[0]] && in[e[1]]) zs.edges.push_back(e);
  return zs;
}

Mesh faces(const SubdivisionState& state, const ZeroSet& zs, ExtractReport* report) {
  const Model& model = state.model();
  const ExtractConfig& cfg = state.config();
  const int H = model.mlp.hidden_neurons();
  ExtractReport local;
  ExtractReport& rep = report ? *report : local;
  rep.zero_vertices = zs.vertices.size();
  rep.zero_edges = zs.edges.size();
  TZ_REQUIRE(det(model.input.M) > 0, domain, "input map must preserve orientation");

  struct Entry {
    Hash128 key;
    uint32_t v;
    uint32_t which;
  };
  std::vector<Entry> entries;
  for (uint32_t v : zs.vertices) {
    const auto regions = state.neighbor_regions(v, H, true);
    for (std::size_t k = 0; k < regions.size(); ++k) entries.push_back({region_hash(regions[k]), v, uint32_t(k)});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.key != b.key ? a.key < b.key : a.v < b.v;
  });

  std::unordered_set<uint64_t> zero_edges;
  for (const auto& [a, b] : zs.edges) zero_edges.insert(edge_key(a, b));

  Mesh mesh;
  std::vector<uint32_t> remap(state.vertex_count(), UINT32_MAX);
  auto mesh_vertex = [&](uint32_t v) {
    if (remap[v] == UINT32_MAX) {
      remap[v] = uint32_t(mesh.vertices.size());
      mesh.vertices.push_back(model.input.invert(state.position(v)));
    }
    return remap[v];
  };

  std::vector<uint32_t> poly;
  std::vector<std::pair<double, uint32_t>> order;
  std::set<std::vector<uint32_t>> seen;
  for (std::size_t i = 0; i < entries.size();) {
    std::size_t j = i;
    while (j < entries.size() && entries[j].key == entries[i].key) ++j;
    poly.clear();
    for (std::size_t k = i; k < j; ++k) poly.push_back(entries[k].v);
    const Entry first = entries[i];
    i = j;
    if (poly.size() < 3) {
      ++rep.skipped_degenerate;
      continue;
    }
    const RegionKey region = state.neighbor_regions(first.v, H, true)[first.which];
    const RegionAffine aff = region_affine(model, region);
    const double gn = norm(aff.grad);
    if (gn < 1e-12) {
      ++rep.skipped_flat;
      continue;
    }
    const Vec3 n = aff.grad * (1.0 / gn);
    Vec3 centroid;
    for (uint32_t v : poly) {
      const Vec3& y = state.position(v);
      const double r = std::abs(dot(aff.grad, y) + aff.offset) / gn;
      TZ_REQUIRE(r <= cfg.planarity_tol, internal, "zero-set polygon is not planar (residual ", r, ") at vertex ", v);
      centroid += y;
    }
    centroid *= 1.0 / double(poly.size());
    const Vec3 e1 = normalized(cross(n, std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0}));
    const Vec3 e2 = cross(n, e1);
    order.clear();
    for (uint32_t v : poly) {
      const Vec3 r = state.position(v) - centroid;
      order.emplace_back(std::atan2(dot(r, e2), dot(r, e1)), v);
    }
    std::sort(order.begin(), order.end());

    // Counterclockwise about n since e1 x e2 = n; the input map keeps orientation.
    double area2 = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Vec3 a = state.position(order[k].second) - centroid;
      const Vec3 b = state.position(order[(k + 1) % order.size()].second) - centroid;
      area2 += dot(cross(a, b), n);
    }
    if (area2 <= 2.0 * cfg.min_area) {
      ++rep.skipped_degenerate;
      continue;
    }
    // A zero set containing a 2-face of the complex is reached from the
    // regions on both sides.
    std::sort(poly.begin(), poly.end());
    if (!seen.insert(poly).second) {
      ++rep.duplicate_polygons;
      continue;
    }
    ++rep.polygons;
    for (std::size_t k = 0; k < order.size(); ++k)
      if (!zero_edges.count(edge_key(order[k].second, order[(k + 1) % order.size()].second)))
        ++rep.missing_polygon_edges;
    const uint32_t p0 = order[0].second;
    for (std::size_t k = 1; k + 1 < order.size(); ++k) {
      const uint32_t p1 = order[k].second, p2 = order[k + 1].second;
      const Vec3 x0 = model.input.invert(state.position(p0));
      const Vec3 x1 = model.input.invert(state.position(p1));
      const Vec3 x2 = model.input.invert(state.position(p2));
      if (0.5 * norm(cross(x1 - x0, x2 - x0)) <= cfg.min_area) {
        ++rep.dropped_triangles;
        continue;
      }
      mesh.triangles.push_back({mesh_vertex(p0), mesh_vertex(p1), mesh_vertex(p2)});
      mesh.region.push_back(first.key.lo);
    }
  }
  return mesh;
}

Mesh extract_mesh(const Model& model, const Skeleton& skeleton, const ExtractConfig& cfg, ExtractReport* report) {
  ExtractReport local;
  ExtractReport& rep = report ? *report : local;
  rep.skeleton_vertices = skeleton.vertices.size();
  rep.skeleton_edges = skeleton.edges.size();
  auto t0 = Clock::now();
  SubdivisionState state(model, skeleton, cfg);
  while (state.processed() < state.neurons()) rep.passes.push_back(state.process_next());
  rep.seconds_subdivide = seconds_since(t0);
  t0 = Clock::now();
  const ZeroSet zs = zero_set(state, cfg.eps_f);
  Mesh mesh = faces(state, zs, &rep);
  rep.seconds_faces = seconds_since(t0);
  return mesh;
}

std::string ExtractReport::to_json() const {
  nlohmann::json j;
  j["skeleton"] = {{"vertices", skeleton_vertices}, {"edges", skeleton_edges}};
  auto& p = j["passes"] = nlohmann::json::array();
  for (const PassStats& s : passes)
    p.push_back({{"neuron", s.neuron},
                 {"split", s.split},
                 {"connected", s.connected},
                 {"vertices", s.vertices},
                 {"edges", s.edges},
                 {"seconds", s.seconds}});
  j["zero_set"] = {{"vertices", zero_vertices}, {"edges", zero_edges}};
  j["faces"] = {{"polygons", polygons},
                {"skipped_degenerate", skipped_degenerate},
                {"skipped_flat", skipped_flat},
                {"duplicate_polygons", duplicate_polygons},
                {"dropped_triangles", dropped_triangles},
                {"missing_polygon_edges", missing_polygon_edges}};
  j["seconds"] = {{"subdivide", seconds_subdivide}, {"faces", seconds_faces}};
  return j.dump(2);
}

}  // namespace tetzero
