#include "tetzero/grid.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

#include "tetzero/error.hpp"

namespace tetzero {

std::vector<int> level_resolutions(const GridConfig& cfg) {
  TZ_REQUIRE(cfg.levels >= 2, invalid_argument, "grid needs at least 2 levels, got ", cfg.levels);
  TZ_REQUIRE(cfg.n_min > 0 && cfg.n_min < cfg.n_max, invalid_argument,
             "grid needs 0 < n_min < n_max, got ", cfg.n_min, " and ", cfg.n_max);
  const double gamma =
      std::exp((std::log(double(cfg.n_max)) - std::log(double(cfg.n_min))) / (cfg.levels - 1));
  std::vector<int> res(cfg.levels);
  for (int l = 0; l < cfg.levels; ++l)
    res[l] = static_cast<int>(std::floor(cfg.n_min * std::pow(gamma, l) + 1e-9));
  return res;
}

std::array<Int3, 4> tetra_corner_offsets(int t) {
  std::array<Int3, 4> v{};
  const auto& ax = kTetraAxes[t];
  v[1] = v[0];
  v[1][ax[0]] = 1;
  v[2] = v[1];
  v[2][ax[1]] = 1;
  v[3] = {1, 1, 1};
  return v;
}

std::array<Int3, 4> lattice_vertices(const TetraId& id) {
  auto v = tetra_corner_offsets(id.tetra);
  for (auto& p : v)
    for (int k = 0; k < 3; ++k) p[k] += id.anchor[k];
  return v;
}

Barycentric barycentric(const Vec3& x, const TetraRef& tet) {
  const Mat3 c = Mat3::from_columns(tet.v[1] - tet.v[0], tet.v[2] - tet.v[0], tet.v[3] - tet.v[0]);
  const Vec3 w = inverse(c) * (x - tet.v[0]);
  return {1.0 - w.x - w.y - w.z, w.x, w.y, w.z};
}

uint8_t bary_mask(const Barycentric& w, double eps) {
  uint8_t m = 0;
  for (int i = 0; i < 4; ++i)
    if (w[i] > eps) m |= uint8_t(1u << i);
  return m;
}

namespace {
std::vector<int> resolved(const GridConfig& cfg) {
  if (cfg.resolutions.empty()) return level_resolutions(cfg);
  for (std::size_t l = 0; l < cfg.resolutions.size(); ++l) {
    TZ_REQUIRE(cfg.resolutions[l] >= 1, invalid_argument, "resolution must be positive");
    TZ_REQUIRE(l == 0 || cfg.resolutions[l] >= cfg.resolutions[l - 1], invalid_argument,
               "resolutions must be nondecreasing");
  }
  return cfg.resolutions;
}
}  // namespace

Grid::Grid(const GridConfig& cfg) : cfg_(cfg), res_(resolved(cfg)) {}

TetraId Grid::locate_id(const Vec3& x, int level, Barycentric* w) const {
  TZ_REQUIRE(level >= 0 && level < levels(), invalid_argument, "level ", level, " out of range");
  constexpr double tol = 1e-9;
  for (int k = 0; k < 3; ++k)
    TZ_REQUIRE(x[k] >= -tol && x[k] <= 1.0 + tol, domain, "point (", x.x, ", ", x.y, ", ", x.z,
               ") outside the unit cube");
  const int n = res_[level];
  TetraId id;
  std::array<double, 3> u{};
  for (int k = 0; k < 3; ++k) {
    const double s = x[k] * n;
    const int a = std::clamp(static_cast<int>(std::floor(s)), 0, n - 1);
    id.anchor[k] = a;
    u[k] = s - a;
  }
  for (int t = 0; t < 6; ++t) {
    const auto& ax = kTetraAxes[t];
    if (u[ax[0]] >= u[ax[1]] && u[ax[1]] >= u[ax[2]]) {
      id.tetra = static_cast<uint8_t>(t);
      if (w) *w = {1.0 - u[ax[0]], u[ax[0]] - u[ax[1]], u[ax[1]] - u[ax[2]], u[ax[2]]};
      return id;
    }
  }
  detail::raise(ErrorCode::internal, "no tetra matched fractional coordinates");
}

TetraRef Grid::tetra(int level, const TetraId& id) const {
  TetraRef ref;
  ref.level = level;
  ref.id = id;
  const double inv = 1.0 / res_[level];
  const auto lv = lattice_vertices(id);
  for (int i = 0; i < 4; ++i) ref.v[i] = Vec3(lv[i][0], lv[i][1], lv[i][2]) * inv;
  return ref;
}

TetraRef Grid::locate(const Vec3& x, int level) const { return tetra(level, locate_id(x, level)); }

RegionIndicator Grid::region_indicator(const Vec3& x) const {
  RegionIndicator r(levels());
  for (int l = 0; l < levels(); ++l) r[l] = locate_id(x, l);
  return r;
}

std::vector<LevelTag> Grid::tags(const Vec3& x, double mask_eps) const {
  std::vector<LevelTag> out(levels());
  for (int l = 0; l < levels(); ++l) {
    Barycentric w;
    out[l].id = locate_id(x, l, &w);
    out[l].mask = bary_mask(w, mask_eps);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lookup tables

namespace {

NeighborEntry ne(int dx, int dy, int dz, int t) { return {{dx, dy, dz}, uint8_t(t)}; }

NeighborTables make_builtin() {
  NeighborTables lut;
  // face f is opposite vertex v_f
  const int face[6][4][4] = {
      {{1, 0, 0, 4}, {0, 0, 0, 5}, {0, 0, 0, 1}, {0, -1, 0, 2}},
      {{1, 0, 0, 3}, {0, 0, 0, 2}, {0, 0, 0, 0}, {0, 0, -1, 5}},
      {{0, 1, 0, 0}, {0, 0, 0, 1}, {0, 0, 0, 3}, {0, 0, -1, 4}},
      {{0, 1, 0, 5}, {0, 0, 0, 4}, {0, 0, 0, 2}, {-1, 0, 0, 1}},
      {{0, 0, 1, 2}, {0, 0, 0, 3}, {0, 0, 0, 5}, {-1, 0, 0, 0}},
      {{0, 0, 1, 1}, {0, 0, 0, 0}, {0, 0, 0, 4}, {0, -1, 0, 3}},
  };
  for (int t = 0; t < 6; ++t)
    for (int f = 0; f < 4; ++f)
      lut.face[t][f] = {ne(face[t][f][0], face[t][f][1], face[t][f][2], face[t][f][3])};

  auto& e = lut.edge;
  e[0][0] = {ne(0, -1, -1, 3), ne(0, -1, -1, 4), ne(0, 0, -1, 5), ne(0, -1, 0, 2), ne(0, 0, 0, 1)};
  e[0][1] = {ne(0, -1, 0, 2), ne(0, -1, 0, 3), ne(0, 0, 0, 5)};
  e[0][2] = {ne(0, 0, 0, 1), ne(0, 0, 0, 2), ne(0, 0, 0, 3), ne(0, 0, 0, 4), ne(0, 0, 0, 5)};
  e[0][3] = {ne(0, -1, 0, 1), ne(0, -1, 0, 2), ne(1, -1, 0, 3), ne(1, 0, 0, 4), ne(1, 0, 0, 5)};
  e[0][4] = {ne(0, 0, 0, 1), ne(1, 0, 0, 3), ne(1, 0, 0, 4)};
  e[0][5] = {ne(0, 0, 0, 5), ne(1, 0, 0, 4), ne(0, 0, 1, 1), ne(1, 0, 1, 2), ne(1, 0, 1, 3)};

  e[1][0] = {ne(0, -1, -1, 3), ne(0, -1, -1, 4), ne(0, 0, -1, 5), ne(0, -1, 0, 2), ne(0, 0, 0, 0)};
  e[1][1] = {ne(0, 0, -1, 4), ne(0, 0, -1, 5), ne(0, 0, 0, 2)};
  e[1][2] = {ne(0, 0, 0, 0), ne(0, 0, 0, 2), ne(0, 0, 0, 3), ne(0, 0, 0, 4), ne(0, 0, 0, 5)};
  e[1][3] = {ne(0, 0, -1, 0), ne(0, 0, -1, 5), ne(1, 0, -1, 4), ne(1, 0, 0, 2), ne(1, 0, 0, 3)};
  e[1][4] = {ne(0, 0, 0, 0), ne(1, 0, 0, 3), ne(1, 0, 0, 4)};
  e[1][5] = {ne(0, 0, 0, 2), ne(1, 0, 0, 3), ne(0, 1, 0, 0), ne(1, 1, 0, 4), ne(1, 1, 0, 5)};

  e[2][0] = {ne(-1, 0, -1, 0), ne(-1, 0, -1, 5), ne(0, 0, -1, 4), ne(-1, 0, 0, 1), ne(0, 0, 0, 3)};
  e[2][1] = {ne(0, 0, -1, 4), ne(0, 0, -1, 5), ne(0, 0, 0, 1)};
  e[2][2] = {ne(0, 0, 0, 0), ne(0, 0, 0, 1), ne(0, 0, 0, 3), ne(0, 0, 0, 4), ne(0, 0, 0, 5)};
  e[2][3] = {ne(0, 0, -1, 3), ne(0, 0, -1, 4), ne(0, 1, -1, 5), ne(0, 1, 0, 0), ne(0, 1, 0, 1)};
  e[2][4] = {ne(0, 0, 0, 3), ne(0, 1, 0, 0), ne(0, 1, 0, 5)};
  e[2][5] = {ne(0, 0, 0, 1), ne(1, 0, 0, 3), ne(0, 1, 0, 0), ne(1, 1, 0, 4), ne(1, 1, 0, 5)};

  e[3][0] = {ne(-1, 0, -1, 0), ne(-1, 0, -1, 5), ne(0, 0, -1, 4), ne(-1, 0, 0, 1), ne(0, 0, 0, 2)};
  e[3][1] = {ne(-1, 0, 0, 0), ne(-1, 0, 0, 1), ne(0, 0, 0, 4)};
  e[3][2] = {ne(0, 0, 0, 0), ne(0, 0, 0, 1), ne(0, 0, 0, 2), ne(0, 0, 0, 4), ne(0, 0, 0, 5)};
  e[3][3] = {ne(-1, 0, 0, 1), ne(-1, 0, 0, 2), ne(-1, 1, 0, 0), ne(0, 1, 0, 4), ne(0, 1, 0, 5)};
  e[3][4] = {ne(0, 0, 0, 2), ne(0, 1, 0, 0), ne(0, 1, 0, 5)};
  e[3][5] = {ne(0, 0, 0, 4), ne(0, 1, 0, 5), ne(0, 0, 1, 2), ne(0, 1, 1, 0), ne(0, 1, 1, 1)};

  e[4][0] = {ne(-1, -1, 0, 1), ne(-1, -1, 0, 2), ne(0, -1, 0, 3), ne(-1, 0, 0, 0), ne(0, 0, 0, 5)};
  e[4][1] = {ne(-1, 0, 0, 0), ne(-1, 0, 0, 1), ne(0, 0, 0, 3)};
  e[4][2] = {ne(0, 0, 0, 0), ne(0, 0, 0, 1), ne(0, 0, 0, 2), ne(0, 0, 0, 3), ne(0, 0, 0, 5)};
  e[4][3] = {ne(-1, 0, 0, 0), ne(-1, 0, 0, 5), ne(-1, 0, 1, 1), ne(0, 0, 1, 2), ne(0, 0, 1, 3)};
  e[4][4] = {ne(0, 0, 0, 5), ne(0, 0, 1, 1), ne(0, 0, 1, 2)};
  e[4][5] = {ne(0, 0, 0, 3), ne(0, 1, 0, 5), ne(0, 0, 1, 2), ne(0, 1, 1, 0), ne(0, 1, 1, 1)};

  e[5][0] = {ne(-1, -1, 0, 1), ne(-1, -1, 0, 2), ne(0, -1, 0, 3), ne(-1, 0, 0, 0), ne(0, 0, 0, 4)};
  e[5][1] = {ne(0, -1, 0, 2), ne(0, -1, 0, 3), ne(0, 0, 0, 0)};
  e[5][2] = {ne(0, 0, 0, 0), ne(0, 0, 0, 1), ne(0, 0, 0, 2), ne(0, 0, 0, 3), ne(0, 0, 0, 4)};
  e[5][3] = {ne(0, -1, 0, 3), ne(0, -1, 0, 4), ne(0, -1, 1, 2), ne(0, 0, 1, 0), ne(0, 0, 1, 1)};
  e[5][4] = {ne(0, 0, 0, 4), ne(0, 0, 1, 1), ne(0, 0, 1, 2)};
  e[5][5] = {ne(0, 0, 0, 0), ne(1, 0, 0, 4), ne(0, 0, 1, 1), ne(1, 0, 1, 2), ne(1, 0, 1, 3)};

  for (int t = 0; t < 6; ++t) lut.vertex.push_back(ne(-1, -1, -1, t));
  for (int t : {1, 2}) lut.vertex.push_back(ne(-1, -1, 0, t));
  for (int t : {0, 5}) lut.vertex.push_back(ne(-1, 0, -1, t));
  for (int t : {0, 1}) lut.vertex.push_back(ne(-1, 0, 0, t));
  for (int t : {3, 4}) lut.vertex.push_back(ne(0, -1, -1, t));
  for (int t : {2, 3}) lut.vertex.push_back(ne(0, -1, 0, t));
  for (int t : {4, 5}) lut.vertex.push_back(ne(0, 0, -1, t));
  for (int t = 0; t < 6; ++t) lut.vertex.push_back(ne(0, 0, 0, t));
  return lut;
}

bool contains_all(const std::array<Int3, 4>& verts, const std::vector<Int3>& pts) {
  return std::all_of(pts.begin(), pts.end(), [&](const Int3& p) {
    return std::find(verts.begin(), verts.end(), p) != verts.end();
  });
}

// All tetrahedra with anchors in {-1,0,1}^3 whose vertex set contains `pts`.
std::vector<NeighborEntry> incident(const std::vector<Int3>& pts) {
  std::vector<NeighborEntry> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        for (int t = 0; t < 6; ++t) {
          const TetraId id{{dx, dy, dz}, uint8_t(t)};
          if (contains_all(lattice_vertices(id), pts)) out.push_back(ne(dx, dy, dz, t));
        }
  std::sort(out.begin(), out.end());
  return out;
}

std::string describe(const std::vector<NeighborEntry>& v) {
  std::ostringstream os;
  os << "{";
  for (const auto& e : v)
    os << " (" << e.delta[0] << "," << e.delta[1] << "," << e.delta[2] << ";" << int(e.tetra) << ")";
  os << " }";
  return os.str();
}

std::vector<NeighborEntry> sorted(std::vector<NeighborEntry> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

const NeighborTables& NeighborTables::builtin() {
  static const NeighborTables lut = make_builtin();
  return lut;
}

NeighborTables NeighborTables::from_geometry() {
  NeighborTables lut;
  for (int t = 0; t < 6; ++t) {
    const auto v = tetra_corner_offsets(t);
    const NeighborEntry self = ne(0, 0, 0, t);
    auto drop_self = [&](std::vector<NeighborEntry> in) {
      in.erase(std::remove(in.begin(), in.end(), self), in.end());
      return in;
    };
    for (int f = 0; f < 4; ++f) {
      std::vector<Int3> pts;
      for (int i = 0; i < 4; ++i)
        if (i != f) pts.push_back(v[i]);
      lut.face[t][f] = drop_self(incident(pts));
    }
    for (int e = 0; e < 6; ++e)
      lut.edge[t][e] = drop_self(incident({v[kTetraEdges[e][0]], v[kTetraEdges[e][1]]}));
  }
  lut.vertex = incident({Int3{0, 0, 0}});
  return lut;
}

std::vector<TetraId> level_neighbors(const LevelTag& tag, const NeighborTables& lut) {
  std::vector<TetraId> out{tag.id};
  const int t = tag.id.tetra;
  auto push = [&](const NeighborEntry& e, const Int3& shift) {
    TetraId n;
    for (int k = 0; k < 3; ++k) n.anchor[k] = tag.id.anchor[k] + e.delta[k] + shift[k];
    n.tetra = e.tetra;
    if (n != tag.id) out.push_back(n);
  };
  const uint8_t m = tag.mask & 0xF;
  switch (zero_count(m)) {
    case 0:
      break;
    case 1: {
      const int f = __builtin_ctz(~m & 0xF);
      for (const auto& e : lut.face[t][f]) push(e, {0, 0, 0});
      break;
    }
    case 2: {
      const int a = __builtin_ctz(m);
      const int b = 31 - __builtin_clz(m);
      int edge = -1;
      for (int e = 0; e < 6; ++e)
        if (kTetraEdges[e][0] == a && kTetraEdges[e][1] == b) edge = e;
      for (const auto& e : lut.edge[t][edge]) push(e, {0, 0, 0});
      break;
    }
    case 3: {
      const int i = __builtin_ctz(m);
      const Int3 corner = tetra_corner_offsets(t)[i];
      for (const auto& e : lut.vertex) push(e, corner);
      break;
    }
    default:
      detail::raise(ErrorCode::invalid_argument, "barycentric mask has four zeros");
  }
  return out;
}

std::vector<RegionIndicator> grid_neighbors(const RegionIndicator& r, const BarycentricMask& m,
                                            const NeighborTables& lut) {
  TZ_REQUIRE(r.size() == m.size(), invalid_argument, "indicator has ", r.size(),
             " levels but mask has ", m.size());
  std::vector<std::vector<TetraId>> per_level;
  for (std::size_t l = 0; l < r.size(); ++l) per_level.push_back(level_neighbors({r[l], m[l]}, lut));
  std::vector<RegionIndicator> out{RegionIndicator{}};
  for (const auto& options : per_level) {
    std::vector<RegionIndicator> next;
    next.reserve(out.size() * options.size());
    for (const auto& prefix : out)
      for (const auto& id : options) {
        next.push_back(prefix);
        next.back().push_back(id);
      }
    out = std::move(next);
  }
  return out;
}

LutReport validate_neighbor_tables(const NeighborTables& lut) {
  LutReport report;
  const NeighborTables oracle = NeighborTables::from_geometry();
  auto check = [&](const std::string& what, const std::vector<NeighborEntry>& got,
                   const std::vector<NeighborEntry>& want) {
    ++report.rows_checked;
    const auto g = sorted(got);
    if (std::adjacent_find(g.begin(), g.end()) != g.end())
      report.mismatches.push_back(what + ": duplicate entries " + describe(g));
    if (g != want)
      report.mismatches.push_back(what + ": table " + describe(g) + " vs oracle " + describe(want));
  };
  for (int t = 0; t < 6; ++t) {
    for (int f = 0; f < 4; ++f)
      check("face t=" + std::to_string(t) + " f=" + std::to_string(f), lut.face[t][f],
            oracle.face[t][f]);
    for (int e = 0; e < 6; ++e)
      check("edge t=" + std::to_string(t) + " e=" + std::to_string(e), lut.edge[t][e],
            oracle.edge[t][e]);
  }
  check("vertex corner (0,0,0)", lut.vertex, oracle.vertex);

  // Symmetry: B across face f of A must list A across the shared face.
  for (int t = 0; t < 6; ++t)
    for (int f = 0; f < 4; ++f)
      for (const auto& nb : lut.face[t][f]) {
        const TetraId a{{0, 0, 0}, uint8_t(t)};
        const TetraId b{nb.delta, nb.tetra};
        const auto va = lattice_vertices(a);
        const auto vb = lattice_vertices(b);
        int fb = -1;
        for (int i = 0; i < 4; ++i)
          if (std::find(va.begin(), va.end(), vb[i]) == va.end()) fb = i;
        bool back = false;
        if (fb >= 0)
          for (const auto& e : lut.face[nb.tetra][fb])
            back |= (e.tetra == t && e.delta[0] == -nb.delta[0] && e.delta[1] == -nb.delta[1] &&
                     e.delta[2] == -nb.delta[2]);
        if (!back)
          report.mismatches.push_back("face t=" + std::to_string(t) + " f=" + std::to_string(f) +
                                      ": neighbor does not list it back");
      }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

namespace {
using nlohmann::json;

json entries_to_json(const std::vector<NeighborEntry>& v) {
  json a = json::array();
  for (const auto& e : v) a.push_back({e.delta[0], e.delta[1], e.delta[2], int(e.tetra)});
  return a;
}

std::vector<NeighborEntry> entries_from_json(const json& a) {
  std::vector<NeighborEntry> v;
  for (const auto& row : a) {
    TZ_REQUIRE(row.is_array() && row.size() == 4, invalid_argument,
               "neighbor entry must be [dx, dy, dz, t]");
    const int t = row[3].get<int>();
    TZ_REQUIRE(t >= 0 && t < 6, invalid_argument, "tetra index ", t, " out of range");
    v.push_back(ne(row[0].get<int>(), row[1].get<int>(), row[2].get<int>(), t));
  }
  return v;
}
}  // namespace

std::string neighbor_tables_to_json(const NeighborTables& lut) {
  json j;
  j["format"] = "tetzero-luts";
  j["version"] = 1;
  j["convention"] = "kuhn; t -> axis order x>=z>=y, x>=y>=z, y>=x>=z, y>=z>=x, z>=y>=x, z>=x>=y";
  json faces = json::array(), edges = json::array();
  for (int t = 0; t < 6; ++t) {
    for (int f = 0; f < 4; ++f)
      faces.push_back({{"t", t}, {"f", f}, {"neighbors", entries_to_json(lut.face[t][f])}});
    for (int e = 0; e < 6; ++e)
      edges.push_back({{"t", t}, {"e", e}, {"neighbors", entries_to_json(lut.edge[t][e])}});
  }
  j["face"] = faces;
  j["edge"] = edges;
  j["vertex"] = entries_to_json(lut.vertex);
  return j.dump(1);
}

NeighborTables neighbor_tables_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    detail::raise(ErrorCode::invalid_argument, "luts.json: ", e.what());
  }
  TZ_REQUIRE(j.value("format", "") == "tetzero-luts", invalid_argument, "luts.json: bad format tag");
  TZ_REQUIRE(j.value("version", 0) == 1, invalid_argument, "luts.json: unsupported version");
  NeighborTables lut;
  try {
    for (const auto& row : j.at("face")) {
      const int t = row.at("t"), f = row.at("f");
      TZ_REQUIRE(t >= 0 && t < 6 && f >= 0 && f < 4, invalid_argument, "luts.json: bad face row");
      lut.face[t][f] = entries_from_json(row.at("neighbors"));
    }
    for (const auto& row : j.at("edge")) {
      const int t = row.at("t"), e = row.at("e");
      TZ_REQUIRE(t >= 0 && t < 6 && e >= 0 && e < 6, invalid_argument, "luts.json: bad edge row");
      lut.edge[t][e] = entries_from_json(row.at("neighbors"));
    }
    lut.vertex = entries_from_json(j.at("vertex"));
  } catch (const json::exception& e) {
    detail::raise(ErrorCode::invalid_argument, "luts.json: ", e.what());
  }
  return lut;
}

}  // namespace tetzero
