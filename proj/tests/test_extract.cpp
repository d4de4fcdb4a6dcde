#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "tetzero/error.hpp"
#include "tetzero/extract.hpp"

using namespace tetzero;
using namespace fixtures;

TEST_CASE("split: single neuron on the unit cube") {
  Model m = identity_model({1}, {1});
  // preact = y0 - 0.25: the edge (0,0,0)-(1,0,0) has d0 = -0.25, d1 = 0.75
  set_neuron(m, 0, 0, {1, 0, 0}, -0.25);
  const Skeleton sk = extract_skeleton(m.grid());
  SubdivisionState st(m, sk);
  CHECK(st.vertex_count() == 8);
  const std::size_t n = st.split_edges(0);
  // edges crossing x = 0.25: the four x-edges, four face diagonals with a
  // dx component and the main diagonal
  std::size_t crossing = 0;
  for (const auto& e : sk.edges) {
    const double a = sk.vertices[e[0]].x - 0.25, b = sk.vertices[e[1]].x - 0.25;
    crossing += a * b < 0;
  }
  CHECK(n == crossing);
  bool found = false;
  for (uint32_t v = 8; v < st.vertex_count(); ++v) {
    CHECK(std::abs(m.neuron_preact_grid(st.position(v), 0)) <= 1e-10);
    CHECK(st.sign(v, 0) == 0);
    found = found || norm(st.position(v) - Vec3{0.25, 0, 0}) < 1e-15;
  }
  CHECK(found);
}

TEST_CASE("split: midpoint and quarter weights") {
  Model m = identity_model({1}, {1});
  set_neuron(m, 0, 0, {4, 0, 0}, -2);  // d0 = -2, d1 = 2 on x-edges
  SubdivisionState st(m, extract_skeleton(m.grid()));
  st.split_edges(0);
  bool mid = false;
  for (uint32_t v = 8; v < st.vertex_count(); ++v) mid = mid || st.position(v) == Vec3{0.5, 0, 0};
  CHECK(mid);
}

TEST_CASE("subdivide: trivial cases leave the skeleton unchanged") {
  const Skeleton sk = extract_skeleton(Grid(GridConfig::explicit_levels({2, 3})));
  SUBCASE("affine network") {
    Model m = identity_model({2, 3}, {});
    SubdivisionState st(m, sk);
    CHECK(st.neurons() == 1);
    CHECK(st.vertex_count() == sk.vertices.size());
    CHECK(st.edges() == sk.edges);
  }
  SUBCASE("boundary outside the domain") {
    Model m = identity_model({2, 3}, {1});
    set_neuron(m, 0, 0, {1, 1, 1, 0, 0, 0}, 5.0);
    SubdivisionState st(m, sk);
    const PassStats p = st.process_next();
    CHECK(p.split == 0);
    CHECK(p.connected == 0);
    CHECK(st.edges() == sk.edges);
  }
}

TEST_CASE("split: count equals sign flips found by dense sampling") {
  Grid g(GridConfig::explicit_levels({2, 3}));
  Encoder e(g, {2, 19});
  std::mt19937_64 rng(11);
  e.init_uniform(rng, 1.0);
  Mlp mlp(e.output_dim(), {3, 3});
  mlp.init_uniform(rng);
  Model m(e, mlp);
  const Skeleton sk = extract_skeleton(g);
  SubdivisionState st(m, sk);
  for (int g0 = 0; g0 < 3; ++g0) {
    const auto edges = st.edges();
    std::size_t flips = 0;
    for (const auto& [a, b] : edges) {
      int last = 0, changes = 0;
      for (int k = 0; k <= 64; ++k) {
        const Vec3 y = st.position(a) * (1 - k / 64.0) + st.position(b) * (k / 64.0);
        const int s = sign_of(m.neuron_preact_grid(y, g0), 1e-10);
        if (s != 0 && last != 0 && s != last) ++changes;
        if (s != 0) last = s;
      }
      flips += changes;
    }
    const PassStats p = st.process_next();
    CHECK(p.split == flips);
  }
}

TEST_CASE("connect: plane through one cube forms the tetra-clipped polygons") {
  Model m = identity_model({1}, {1});
  set_neuron(m, 0, 0, {0.3, 0.5, 0.7}, -0.61);
  SubdivisionState st(m, extract_skeleton(m.grid()));
  const PassStats p = st.process_next();
  // Oracle: sides of (tetra ∩ plane) polygons, deduplicated across tetrahedra.
  std::set<oracle::KeyEdge> sides;
  for (int t = 0; t < 6; ++t) {
    auto hs = oracle::tetra_halfspaces(m.grid().tetra(0, {{0, 0, 0}, uint8_t(t)}).v);
    hs.push_back({{0.3, 0.5, 0.7}, 0.61});
    hs.push_back({{-0.3, -0.5, -0.7}, -0.61});
    const auto poly = oracle::enumerate_polytope(hs);
    for (const auto& e : poly.edges) {
      // sides lying on a cube face are skeleton edges already split, not new
      const Vec3 a = poly.vertices[e[0]], b = poly.vertices[e[1]];
      sides.insert(oracle::key_edge(a, b));
    }
  }
  std::set<oracle::KeyEdge> ours;
  for (const auto& [a, b] : st.edges())
    if (st.sign(a, 0) == 0 && st.sign(b, 0) == 0) ours.insert(oracle::key_edge(st.position(a), st.position(b)));
  CHECK(ours == sides);
  CHECK(p.connected == sides.size());
}

TEST_CASE("connect: vertices on two hyperplanes are joined") {
  // Planes y0 = 0.5 and y1 = 0.6 meet in a line crossing the tetra faces
  // y0 = y2 and y1 = y2 at z = 0.5 and z = 0.6.
  Model m = identity_model({1}, {2});
  set_neuron(m, 0, 0, {1, 0, 0}, -0.5);
  set_neuron(m, 0, 1, {0, 1, 0}, -0.6);
  SubdivisionState st(m, extract_skeleton(m.grid()));
  st.process_next();
  st.process_next();
  std::set<double> line;
  for (uint32_t v = 0; v < st.vertex_count(); ++v)
    if (st.sign(v, 0) == 0 && st.sign(v, 1) == 0) line.insert(st.position(v).z);
  CHECK(line == std::set<double>{0.0, 0.5, 0.6, 1.0});
  std::size_t on_line = 0;
  for (const auto& [a, b] : st.edges()) {
    CHECK(st.share_region(a, b, st.processed()));
    on_line += st.sign(a, 0) == 0 && st.sign(a, 1) == 0 && st.sign(b, 0) == 0 && st.sign(b, 1) == 0;
  }
  CHECK(on_line == 3);
}

TEST_CASE("neighbor_regions sizes") {
  Model m = identity_model({2}, {2});
  set_neuron(m, 0, 0, {1, 0, 0}, -0.3);
  set_neuron(m, 0, 1, {0, 1, 0}, -0.2);
  Skeleton sk;
  sk.vertices = {{0.35, 0.25, 0.1}, {0.3, 0.2, 0.1}, {0.3, 0.1, 0.5}};
  sk.incidence.resize(3);
  SubdivisionState st(m, sk);
  SUBCASE("interior, no zeros") { CHECK(st.neighbor_regions(0, 2).size() == 1); }
  SUBCASE("two zeros inside a cell") {
    CHECK(st.sign(1, 0) == 0);
    CHECK(st.sign(1, 1) == 0);
    CHECK(st.neighbor_regions(1, 2).size() == 4);
  }
  SUBCASE("cell face and one zero") {
    // (0.3, 0.1, 0.5) lies on the level plane z = 0.5 at N = 2
    CHECK(st.sign(2, 0) == 0);
    CHECK(st.neighbor_regions(2, 1).size() == 4);
    CHECK(st.neighbor_regions(2, 2).size() == 4);
  }
  SUBCASE("blow-up guard") {
    ExtractConfig cfg;
    cfg.max_neighbors = 2;
    SubdivisionState tight(m, sk, cfg);
    CHECK_THROWS_AS(tight.neighbor_regions(1, 2), Error);
  }
}

TEST_CASE("zero_set: selection") {
  Model m = identity_model({2}, {});
  set_neuron(m, 0, 0, {1, 0, 0}, -0.5);
  SubdivisionState st(m, extract_skeleton(m.grid()));
  st.process_next();
  const ZeroSet all = zero_set(st, std::numeric_limits<double>::infinity());
  CHECK(all.vertices.size() == st.vertex_count());
  CHECK(all.edges.size() == st.edges().size());
  const ZeroSet zs = zero_set(st, 1e-9);
  CHECK(!zs.vertices.empty());
  for (uint32_t v : zs.vertices) {
    CHECK(std::abs(st.value(v)) <= 1e-9);
    CHECK(std::abs(st.position(v).x - 0.5) <= 1e-12);
  }
}

TEST_CASE("faces: a plane gives the clipped unit square") {
  // x = 0.5 on [2, 3] lies on level-0 lattice faces (polygons reached from
  // both sides); x = 0.45 cuts through cells.
  for (auto [res, x0] : {std::pair{std::vector<int>{1}, 0.5}, std::pair{std::vector<int>{2, 3}, 0.45},
                         std::pair{std::vector<int>{2, 3}, 0.5}}) {
    CAPTURE(x0);
    Model m = identity_model(res, {});
    set_neuron(m, 0, 0, std::vector<double>(3 * res.size(), 0.0), -x0);
    m.mlp.layers()[0].W[0] = 1.0;
    ExtractReport rep;
    const Mesh mesh = extract_mesh(m, extract_skeleton(m.grid()), {}, &rep);
    CHECK(surface_area(mesh) == doctest::Approx(1.0).epsilon(1e-12));
    for (const Vec3& v : mesh.vertices) CHECK(std::abs(v.x - x0) <= 1e-12);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) CHECK(mesh.normal(t).x > 0);
    const TopologyReport topo = check_topology(mesh);
    CHECK(topo.nonmanifold_edges == 0);
    CHECK(topo.misoriented_edges == 0);
    CHECK(rep.missing_polygon_edges == 0);
    if (res.size() == 1) {
      // one polygon per tetra the plane crosses
      CHECK(rep.polygons == 6);
      // the square's outline: 4 sides split at the face-diagonal crossings
      CHECK(topo.boundary_edges == 8);
    }
  }
}

TEST_CASE("faces: empty zero set") {
  Model m = identity_model({2}, {});
  m.mlp.layers()[0].b[0] = 1.0;
  const Mesh mesh = extract_mesh(m, extract_skeleton(m.grid()));
  CHECK(mesh.empty());
}

TEST_CASE("extract: convex polytope is closed, exact and outward") {
  Model m = tetra_norm({2, 3}, {0.47, 0.52, 0.49}, 0.4);
  ExtractReport rep;
  const Mesh mesh = extract_mesh(m, extract_skeleton(m.grid()), {}, &rep);
  REQUIRE(!mesh.empty());
  CHECK(check_topology(mesh).closed_manifold());
  CHECK(rep.missing_polygon_edges == 0);
  CHECK(rep.duplicate_polygons == 0);
  for (const Vec3& v : mesh.vertices) CHECK(std::abs(m.eval(v)) <= 1e-9);
  // enclosed volume against a lattice count of f < 0
  const int n = 160;
  std::size_t inside = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) inside += m.eval({(i + 0.5) / n, (j + 0.5) / n, (k + 0.5) / n}) < 0;
  const double vol = signed_volume(mesh);
  CHECK(vol > 0);
  CHECK(vol == doctest::Approx(double(inside) / (double(n) * n * n)).epsilon(0.02));
}

TEST_CASE("extract: invariants on random networks over two levels") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    Grid g(GridConfig::explicit_levels({2, 3}));
    Encoder e(g, {2, 19});
    std::mt19937_64 rng(seed);
    e.init_uniform(rng, 1.0);
    Mlp mlp(e.output_dim(), {4, 4});
    mlp.init_uniform(rng);
    Model m(e, mlp);
    m.mlp.layers().back().b[0] -= m.eval_grid({0.5, 0.5, 0.5});
    const Skeleton sk = extract_skeleton(g);
    SubdivisionState st(m, sk);
    // idempotence: repeating a pass right after it changes nothing
    while (st.processed() < st.neurons()) {
      st.process_next();
      const int g0 = st.processed() - 1;
      const std::size_t nv = st.vertex_count(), ne = st.edges().size();
      CHECK(st.split_edges(g0) == 0);
      CHECK(st.connect_region_edges(g0) == 0);
      CHECK(st.vertex_count() == nv);
      CHECK(st.edges().size() == ne);
    }

    // edge-region invariant
    std::size_t bad = 0;
    for (const auto& [a, b] : st.edges()) bad += !st.share_region(a, b, st.neurons());
    CHECK(bad == 0);

    ExtractReport rep;
    const Mesh mesh = faces(st, zero_set(st, 1e-9), &rep);
    REQUIRE(!mesh.empty());
    CHECK(rep.missing_polygon_edges == 0);
    CHECK(check_topology(mesh).nonmanifold_edges == 0);
    CHECK(check_topology(mesh).misoriented_edges == 0);

    // exactness on vertices and face interiors, collinear affineness
    std::mt19937_64 pick(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_v = 0.0, worst_f = 0.0, worst_lin = 0.0;
    for (const Vec3& v : mesh.vertices) worst_v = std::max(worst_v, std::abs(m.eval(v)));
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& f = mesh.triangles[t];
      const Vec3 a = mesh.vertices[f[0]], b = mesh.vertices[f[1]], c = mesh.vertices[f[2]];
      for (int k = 0; k < 10; ++k) {
        double s = u(pick), q = u(pick);
        if (s + q > 1) s = 1 - s, q = 1 - q;
        worst_f = std::max(worst_f, std::abs(m.eval(a + (b - a) * s + (c - a) * q)));
      }
      const Vec3 p0 = (a + b + c) * (1.0 / 3.0);
      const Vec3 dir = (b - a) * 0.01;
      worst_lin = std::max(worst_lin, std::abs(m.eval(p0 - dir) - 2 * m.eval(p0) + m.eval(p0 + dir)));
    }
    CHECK(worst_v <= 1e-9);
    CHECK(worst_f <= 1e-6);
    CHECK(worst_lin <= 1e-9);

    // orientation along grad f at triangle centroids
    std::size_t flipped = 0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& f = mesh.triangles[t];
      const Vec3 c = (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) * (1.0 / 3.0);
      flipped += dot(mesh.normal(t), m.grad(c)) <= 0;
    }
    CHECK(flipped == 0);
  }
}

TEST_CASE("extract: random small networks match exhaustive region enumeration") {
  int compared = 0;
  for (uint64_t seed = 100; seed < 124; ++seed) {
    const Model m = random_small(seed);
    const auto polys = oracle::zero_polygons(m);
    const Mesh mesh = extract_mesh(m, extract_skeleton(m.grid()));
    const auto ours = oracle::triangles_of(mesh);
    const auto ref = oracle::fan(polys);
    CAPTURE(seed);
    REQUIRE(ours.empty() == ref.empty());
    if (ref.empty()) continue;
    CHECK(oracle::hausdorff(ours, ref) <= 1e-8);
    double area_ref = 0.0;
    for (const auto& t : ref) area_ref += 0.5 * norm(cross(t[1] - t[0], t[2] - t[0]));
    CHECK(surface_area(mesh) == doctest::Approx(area_ref).epsilon(1e-9));
    ++compared;
  }
  CHECK(compared >= 20);
}
