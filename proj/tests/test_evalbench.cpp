#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "tetzero/evalbench.hpp"
#include "tetzero/error.hpp"

using namespace tetzero;
using namespace fixtures;

namespace {

std::multiset<std::array<double, 9>> triangle_set(const Mesh& m) {
  std::multiset<std::array<double, 9>> out;
  for (const auto& f : m.triangles) {
    // rotate so the smallest vertex leads; winding is preserved
    std::array<Vec3, 3> p{m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]};
    auto less = [](const Vec3& a, const Vec3& b) {
      return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
    };
    const int k = int(std::min_element(p.begin(), p.end(), less) - p.begin());
    std::array<double, 9> key;
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 3; ++a) key[3 * s + a] = p[(k + s) % 3][a];
    out.insert(key);
  }
  return out;
}

Mesh square(double z) {
  Mesh m;
  m.vertices = {{0, 0, z}, {1, 0, z}, {1, 1, z}, {0, 1, z}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

// f = y0 - c on the single-cube grid, scene coordinates = grid coordinates.
Model plane_model(double c) {
  Model m = identity_model({1}, {1});
  set_neuron(m, 0, 0, {1, 0, 0}, 10.0);
  set_neuron(m, 1, 0, {1}, -10.0 - c);
  return m;
}

}  // namespace

TEST_CASE("closest point on triangle agrees with dense barycentric search") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const Vec3 a{0, 0, 0}, b{1, 0.2, 0}, c{0.3, 0.9, 0.4};
  for (int it = 0; it < 200; ++it) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    const Vec3 q = closest_point_on_triangle(p, a, b, c);
    const double d = norm(q - p);
    double brute = INFINITY;
    const int n = 200;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; i + j <= n; ++j) {
        const Vec3 s = a + (b - a) * (double(i) / n) + (c - a) * (double(j) / n);
        brute = std::min(brute, norm(s - p));
      }
    CHECK(d <= brute + 1e-12);
    CHECK(d >= brute - 1e-2);
  }
  // exact regions
  CHECK(norm(closest_point_on_triangle({-1, -1, 0}, a, b, c) - a) == 0.0);
  CHECK(norm(closest_point_on_triangle({0.3, 0.3, 5}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0}) - Vec3{0.3, 0.3, 0}) < 1e-15);
  // degenerate triangle falls back to its sides
  const Vec3 q = closest_point_on_triangle({0.5, 1, 0}, {0, 0, 0}, {1, 0, 0}, {2, 0, 0});
  CHECK(norm(q - Vec3{0.5, 0, 0}) < 1e-15);
}

TEST_CASE("BVH nearest equals brute force") {
  const Mesh m = gt_mesh(Shape::torus({0.1, 0, 0}, 0.5, 0.2), 24);
  REQUIRE(m.triangles.size() > 500);
  const TriangleBvh bvh(m);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int it = 0; it < 300; ++it) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    double best = INFINITY;
    for (const auto& f : m.triangles) {
      const Vec3 q = closest_point_on_triangle(p, m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
      best = std::min(best, dot(q - p, q - p));
    }
    const auto hit = bvh.nearest(p);
    CHECK(hit.dist2 == best);
    CHECK(dot(hit.point - p, hit.point - p) == hit.dist2);
  }
  CHECK_THROWS_AS(TriangleBvh(Mesh{}), Error);
}

TEST_CASE("marching cubes: sphere is closed, outward and close to analytic") {
  const double r = 0.6;
  const Mesh m = gt_mesh(Shape::sphere({0.05, -0.02, 0.01}, r), 64);
  const auto topo = check_topology(m);
  CHECK(topo.closed_manifold());
  const double area = surface_area(m), exact_area = 4 * std::numbers::pi * r * r;
  CHECK(std::abs(area - exact_area) / exact_area < 0.01);
  const double vol = signed_volume(m), exact_vol = 4.0 / 3.0 * std::numbers::pi * r * r * r;
  CHECK(vol > 0);
  CHECK(std::abs(vol - exact_vol) / exact_vol < 0.01);
  double worst = 0.0;
  for (const Vec3& v : m.vertices) worst = std::max(worst, std::abs(norm(v - Vec3{0.05, -0.02, 0.01}) - r));
  CHECK(worst < 2e-3);
}

TEST_CASE("marching cubes: linear field is reproduced exactly") {
  const Vec3 n{1.0, 0.3, -0.2};
  const auto f = [&](const Vec3& x) { return dot(n, x) - 0.05; };
  const Mesh m = marching_cubes(f, {17, {-1, -1, -1}, {1, 1, 1}});
  REQUIRE(!m.empty());
  for (const Vec3& v : m.vertices) CHECK(std::abs(f(v)) <= 1e-12);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const Vec3 nt = m.normal(t);
    if (norm(nt) == 0) continue;
    CHECK(dot(nt, n) / (norm(nt) * norm(n)) > 1 - 1e-9);
  }
  const auto topo = check_topology(m);
  CHECK(topo.nonmanifold_edges == 0);
  CHECK(topo.misoriented_edges == 0);
  CHECK_THROWS_AS(marching_cubes(f, {1}), Error);
}

TEST_CASE("banded marching cubes matches the dense sweep") {
  SUBCASE("analytic torus") {
    const Shape s = Shape::torus({0, 0.1, 0}, 0.55, 0.2);
    const auto f = [&](const Vec3& x) { return sdf_eval(s, x); };
    const McGrid g{50, {-1, -1, -1}, {1, 1, 1}};
    const Mesh dense = marching_cubes(f, g);
    for (int block : {1, 4, 7, 8}) {
      const Mesh band = marching_cubes_banded(f, g, 1.0, block);
      CHECK(band.vertices.size() == dense.vertices.size());
      CHECK(triangle_set(band) == triangle_set(dense));
    }
  }
  SUBCASE("network field with estimated Lipschitz bound") {
    Model m = tetra_norm({2, 3}, {0.5, 0.48, 0.52}, 0.35);
    const McGrid g{40, {0, 0, 0}, {1, 1, 1}};
    const auto f = [&](const Vec3& x) { return m.eval(x); };
    const double lip = estimate_lipschitz(m, g, 16);
    CHECK(lip >= std::sqrt(3.0));  // the four planes sum to at least this slope
    const Mesh dense = marching_cubes(f, g);
    REQUIRE(!dense.empty());
    CHECK(triangle_set(marching_cubes_banded(f, g, lip, 8)) == triangle_set(dense));
  }
}

TEST_CASE("area-uniform sampling") {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 2, 0}, {0, 0, 1}, {3, 0, 1}, {0, 2, 1}};
  m.triangles = {{0, 1, 2}, {3, 4, 5}};  // areas 1 and 3
  const auto s = sample_mesh(m, 20000, 3);
  std::size_t first = 0;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const Vec3& p = s.points[i];
    if (s.triangle[i] == 0) {
      ++first;
      CHECK(p.z == 0.0);
      CHECK(p.x / 1.0 + p.y / 2.0 <= 1 + 1e-12);
    } else {
      CHECK(std::abs(p.z - 1.0) < 1e-15);
      CHECK(p.x / 3.0 + p.y / 2.0 <= 1 + 1e-12);
    }
  }
  CHECK(std::abs(double(first) / 20000 - 0.25) < 0.015);
  // same seed, same points
  CHECK(sample_mesh(m, 100, 3).points[57] == s.points[57]);
}

TEST_CASE("chamfer distance") {
  CHECK(chamfer(square(0), square(0), 1000) < 1e-30);
  // parallel coincident-footprint squares: every nearest point is straight across
  CHECK(chamfer(square(0), square(0.01), 2000) == doctest::Approx(1e-4).epsilon(1e-9));
  // finer marching cubes approach a fine reference
  const Shape s = Shape::sphere({0, 0, 0}, 0.55);
  const Mesh ref = gt_mesh(s, 160);
  double prev = INFINITY;
  for (int R : {16, 32, 64}) {
    const double cd = chamfer(gt_mesh(s, R), ref, 20000, 1);
    CHECK(cd < prev);
    prev = cd;
  }
  CHECK_THROWS_AS(chamfer(Mesh{}, ref, 10), Error);
}

TEST_CASE("region boundary distance") {
  const Model m = plane_model(0.5);
  // Kuhn planes x=y, y=z, x=z and the cube faces; the neuron plane sits at x = -10
  CHECK(region_boundary_distance(m, {0.5, 0.2, 0.9}) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(region_boundary_distance(m, {0.45, 0.5, 0.6}) == doctest::Approx(0.05 / std::sqrt(2.0)).epsilon(1e-12));
  // a hidden neuron closer than any face
  Model k = identity_model({1}, {1});
  set_neuron(k, 0, 0, {0, 0, 2}, -0.8);  // zero set z = 0.4
  set_neuron(k, 1, 0, {1}, -0.1);
  CHECK(region_boundary_distance(k, {0.7, 0.2, 0.39}) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("self-consistency of a plane") {
  const Model m = plane_model(0.5);
  Mesh sq;
  sq.vertices = {{0.5, 0.02, 0.03}, {0.5, 0.97, 0.01}, {0.5, 0.95, 0.98}, {0.5, 0.04, 0.96}};
  // winding chosen so the normal is +x, along grad f
  sq.triangles = {{0, 1, 2}, {0, 2, 3}};
  REQUIRE(sq.normal(0).x > 0);
  const auto sc = self_consistency(sq, m, 4000, 2);
  CHECK(sc.ssdf <= 1e-12);
  CHECK(sc.vsdf <= 1e-12);
  CHECK(sc.ad < 1e-6);
  CHECK(sc.ad_samples + sc.ad_skipped == 4000);
  CHECK(sc.ad_samples > 3900);

  Mesh flipped = sq;
  for (auto& t : flipped.triangles) std::swap(t[1], t[2]);
  CHECK(self_consistency(flipped, m, 500, 2).ad == doctest::Approx(180.0));

  Mesh shifted = sq;
  for (auto& v : shifted.vertices) v.x += 0.01;
  const auto ss = self_consistency(shifted, m, 500, 2);
  CHECK(ss.ssdf == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(ss.ad < 1e-6);

  Mesh tilted = sq;
  tilted.vertices[2].x += 0.05;
  CHECK(self_consistency(tilted, m, 500, 2).ad > 0.5);
}

TEST_CASE("metrics report formatting") {
  MetricsReport r;
  r.name = "mc256";
  r.cd = 2.5e-6;
  r.ssdf = 1e-3;
  r.vertices = 10;
  r.triangles = 16;
  r.seconds = 0.5;
  CHECK(MetricsReport::csv_header() == "name,cd_x1e6,ssdf,vsdf,ad_deg,vertices,triangles,seconds");
  CHECK(r.csv_row() == "mc256,2.5,0.001,,,10,16,0.5");
  const std::string j = r.to_json();
  CHECK(j.find("\"cd_x1e6\": 2.5") != std::string::npos);
  CHECK(j.find("vsdf") == std::string::npos);
}
