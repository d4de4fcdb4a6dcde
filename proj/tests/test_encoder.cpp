#include <random>

#include "doctest.h"
#include "tetzero/encoder.hpp"
#include "tetzero/error.hpp"

using namespace tetzero;

namespace {

Vec3 random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  return {u(rng), u(rng), u(rng)};
}

// Random point strictly inside the polyhedral cell of x, by rejection
// around x.
Vec3 random_same_cell(const Grid& g, const Vec3& x, std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-1, 1);
  const auto r = g.region_indicator(x);
  for (;;) {
    const Vec3 y = x + Vec3{u(rng), u(rng), u(rng)} * radius;
    if (std::min({y.x, y.y, y.z}) <= 0 || std::max({y.x, y.y, y.z}) >= 1) continue;
    if (g.region_indicator(y) == r) return y;
  }
}

}  // namespace

TEST_CASE("hash_vertex") {
  Grid g({2, 2, 40});
  Encoder e(g, {2, 5});
  CHECK(e.table(0).dense);
  CHECK(e.table(0).rows == 27);
  CHECK_FALSE(e.table(1).dense);
  CHECK(e.table(1).rows == 32);
  CHECK(e.hash_vertex({0, 0, 0}, 0) == 0);
  CHECK(e.hash_vertex({2, 2, 2}, 0) == 26);
  CHECK(e.hash_vertex({1, 1, 1}, 1) == ((1u ^ 2654435761u ^ 805459861u) % 32u));
  CHECK(e.hash_vertex({7, 3, 9}, 1) == e.hash_vertex({7, 3, 9}, 1));
  CHECK_THROWS_AS(e.hash_vertex({3, 0, 0}, 0), Error);
  CHECK_THROWS_AS(e.hash_vertex({-1, 0, 0}, 1), Error);
}

TEST_CASE("dense levels are injective") {
  Grid g({3, 2, 9});
  Encoder e(g, {1, 12});
  for (int l = 0; l < g.levels(); ++l) {
    const int n = g.resolution(l);
    std::vector<int> seen(e.table(l).rows, 0);
    for (int z = 0; z <= n; ++z)
      for (int y = 0; y <= n; ++y)
        for (int x = 0; x <= n; ++x) ++seen[e.hash_vertex({x, y, z}, l)];
    for (int c : seen) CHECK(c == 1);
  }
}

TEST_CASE("encode at a domain corner reads one row per level") {
  Grid g({3, 2, 8});
  Encoder e(g, {2, 19});
  std::mt19937_64 rng(1);
  e.init_uniform(rng);
  const auto z = e.encode({1, 1, 1});
  for (int l = 0; l < 3; ++l) {
    const int n = g.resolution(l);
    const double* h = e.row(l, e.hash_vertex({n, n, n}, l));
    CHECK(z[2 * l] == doctest::Approx(h[0]).epsilon(1e-15));
    CHECK(z[2 * l + 1] == doctest::Approx(h[1]).epsilon(1e-15));
  }
  Encoder zero(g, {2, 19});
  for (double v : zero.encode({0.3, 0.7, 0.1})) CHECK(v == 0.0);
}

TEST_CASE("affine fields are reproduced exactly") {
  Grid g({3, 2, 9});
  Encoder e(g, {3, 19});
  const Vec3 a{0.3, -1.2, 2.5};
  e.fill_from_vertices([&](int l, const Int3& v, double* h) {
    const double n = g.resolution(l);
    const Vec3 p{v[0] / n, v[1] / n, v[2] / n};
    h[0] = dot(a, p) + 0.7;
    h[1] = p.x;
    h[2] = -p.z;
  });
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 x = random_point(rng);
    const auto z = e.encode(x);
    for (int l = 0; l < 3; ++l) {
      CHECK(std::abs(z[3 * l] - (dot(a, x) + 0.7)) < 1e-12);
      CHECK(std::abs(z[3 * l + 1] - x.x) < 1e-12);
      CHECK(std::abs(z[3 * l + 2] + x.z) < 1e-12);
    }
  }
}

TEST_CASE("cell_affine") {
  Grid g({1 + 1, 1, 2});
  Encoder e(g, {1, 19});
  e.fill_from_vertices([&](int l, const Int3& v, double* h) { h[0] = double(v[0]) / g.resolution(l); });
  const auto m = e.cell_affine(g.region_indicator({0.3, 0.6, 0.2}));
  CHECK(m.A[0] == doctest::Approx(1.0));
  CHECK(std::abs(m.A[1]) < 1e-14);
  CHECK(std::abs(m.A[2]) < 1e-14);
  CHECK(std::abs(m.b[0]) < 1e-14);

  Encoder c(g, {2, 19});
  c.fill_from_vertices([](int, const Int3&, double* h) { h[0] = 0.25; h[1] = -3.0; });
  const auto mc = c.cell_affine(g.region_indicator({0.9, 0.1, 0.4}));
  for (double v : mc.A) CHECK(v == doctest::Approx(0.0));
  CHECK(mc.b[0] == doctest::Approx(0.25));
  CHECK(mc.b[3] == doctest::Approx(-3.0));
}

TEST_CASE("encode equals the cell affine map inside each cell") {
  Grid g({4, 2, 32});
  Encoder e(g, {2, 19});
  std::mt19937_64 rng(3);
  e.init_uniform(rng, 1.0);
  for (int c = 0; c < 100; ++c) {
    const Vec3 x0 = random_point(rng);
    const auto m = e.cell_affine(g.region_indicator(x0));
    for (int i = 0; i < 20; ++i) {
      const Vec3 x = random_same_cell(g, x0, rng, 0.02);
      const auto z = e.encode(x);
      for (int r = 0; r < m.dim; ++r) {
        const double pred = m.A[3 * r] * x.x + m.A[3 * r + 1] * x.y + m.A[3 * r + 2] * x.z + m.b[r];
        REQUIRE(std::abs(pred - z[r]) < 1e-10);
      }
    }
  }
}

TEST_CASE("continuity across faces") {
  Grid g({3, 2, 11});
  Encoder e(g, {2, 19});
  std::mt19937_64 rng(4);
  e.init_uniform(rng, 1.0);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int i = 0; i < 10000; ++i) {
    // points on the plane x = y (diagonal face family) at every level
    Vec3 x{u(rng), 0, u(rng)};
    x.y = x.x;
    const Vec3 a = x + Vec3{1e-9, -1e-9, 0}, b = x - Vec3{1e-9, -1e-9, 0};
    const auto za = e.encode(a), zb = e.encode(b);
    for (std::size_t k = 0; k < za.size(); ++k) REQUIRE(std::abs(za[k] - zb[k]) < 1e-6);
  }
}

TEST_CASE("grad_x matches finite differences") {
  Grid g({3, 2, 11});
  Encoder e(g, {2, 19});
  std::mt19937_64 rng(5);
  e.init_uniform(rng, 1.0);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  int checked = 0;
  while (checked < 300) {
    const Vec3 x{u(rng), u(rng), u(rng)};
    const double h = 1e-6;
    bool interior = true;
    const auto r = g.region_indicator(x);
    for (int k = 0; k < 3 && interior; ++k) {
      Vec3 dx;
      dx[k] = h;
      interior = g.region_indicator(x + dx) == r && g.region_indicator(x - dx) == r;
    }
    if (!interior) continue;
    ++checked;
    const auto m = e.grad_x(x);
    for (int k = 0; k < 3; ++k) {
      Vec3 dx;
      dx[k] = h;
      const auto zp = e.encode(x + dx), zm = e.encode(x - dx);
      for (int q = 0; q < m.dim; ++q) CHECK(std::abs((zp[q] - zm[q]) / (2 * h) - m.A[3 * q + k]) < 1e-5);
    }
    const auto m2 = e.grad_x(random_same_cell(g, x, rng, 1e-3));
    CHECK(m2.A == m.A);
  }
}

TEST_CASE("backprop_features") {
  Grid g({2, 2, 4});
  Encoder e(g, {2, 19});
  std::mt19937_64 rng(6);
  e.init_uniform(rng, 1.0);
  const std::vector<double> zero(4, 0.0);
  CHECK(e.backprop_features({0.3, 0.3, 0.3}, zero).empty());

  const std::vector<double> up{1.0, 2.0, -1.0, 0.5};
  const auto at_vertex = e.backprop_features({0.5, 0.0, 1.0}, up);
  CHECK(at_vertex.size() == 2);  // one row per level
  for (const auto& rg : at_vertex) CHECK(rg.g[0] == doctest::Approx(up[2 * rg.level]));
  const auto g0 = e.backprop_features({0.41, 0.23, 0.67}, up);
  CHECK(g0.size() == 8);

  // finite difference on every touched entry of <u, tau(x)>
  const Vec3 x{0.41, 0.23, 0.67};
  for (const auto& rg : e.backprop_features(x, up))
    for (int k = 0; k < 2; ++k) {
      double& h = e.row(rg.level, rg.row)[k];
      const double saved = h, step = 1e-6;
      h = saved + step;
      auto zp = e.encode(x);
      h = saved - step;
      auto zm = e.encode(x);
      h = saved;
      double fd = 0;
      for (int q = 0; q < 4; ++q) fd += up[q] * (zp[q] - zm[q]) / (2 * step);
      CHECK(std::abs(fd - rg.g[k]) < 1e-6);
    }
}

TEST_CASE("hash collisions accumulate additively") {
  Grid g({2, 2, 6});
  Encoder e(g, {1, 2});  // 4-row hashed tables
  REQUIRE_FALSE(e.table(1).dense);
  const Vec3 x{0.44, 0.21, 0.73};
  const std::vector<double> up{0.0, 1.0};
  double total = 0;
  for (const auto& rg : e.backprop_features(x, up))
    if (rg.level == 1) total += rg.g[0];
  CHECK(total == doctest::Approx(1.0));
}
