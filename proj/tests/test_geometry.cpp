#include <random>

#include "doctest.h"
#include "tetzero/error.hpp"
#include "tetzero/geometry.hpp"

using namespace tetzero;

namespace {
double max_diff(const Mat3& a, const Mat3& b) { return max_abs(a - b); }
}  // namespace

TEST_CASE("inverse times matrix is identity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int it = 0; it < 200; ++it) {
    Mat3 a;
    for (double& v : a.m) v = u(rng);
    if (std::abs(det(a)) < 1e-3) continue;
    CHECK(max_diff(a * inverse(a), Mat3::identity()) < 1e-9);
  }
}

TEST_CASE("inverse rejects singular matrices") {
  const Mat3 a = Mat3::from_rows({1, 2, 3}, {2, 4, 6}, {0, 1, 0});
  CHECK_THROWS_AS(inverse(a), Error);
}

TEST_CASE("sym_eigen reconstructs random symmetric matrices") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int it = 0; it < 500; ++it) {
    Mat3 a;
    for (int r = 0; r < 3; ++r)
      for (int c = r; c < 3; ++c) a(r, c) = a(c, r) = u(rng);
    const SymEigen e = sym_eigen(a);
    CHECK(e.values[0] <= e.values[1]);
    CHECK(e.values[1] <= e.values[2]);
    Mat3 d;
    for (int i = 0; i < 3; ++i) d(i, i) = e.values[i];
    CHECK(max_diff(e.vectors * d * e.vectors.transposed(), a) < 1e-9);
    CHECK(max_diff(e.vectors.transposed() * e.vectors, Mat3::identity()) < 1e-9);
  }
}

TEST_CASE("sym_eigen handles repeated eigenvalues") {
  const Mat3 m = Mat3::from_rows({5, -2, -2}, {-2, 5, -2}, {-2, -2, 5}) * (1.0 / 3.0);
  const SymEigen e = sym_eigen(m);
  CHECK(e.values[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(e.values[1] == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
  CHECK(e.values[2] == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
  Mat3 d;
  for (int i = 0; i < 3; ++i) d(i, i) = e.values[i];
  CHECK(max_diff(e.vectors * d * e.vectors.transposed(), m) < 1e-12);

  const SymEigen id = sym_eigen(Mat3::identity() * 2.0);
  CHECK(id.values[0] == 2.0);
  CHECK(id.values[2] == 2.0);
}
