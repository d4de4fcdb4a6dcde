#include "tetzero/geometry.hpp"

#include <algorithm>
#include <numbers>

#include "tetzero/error.hpp"

namespace tetzero {

Mat3 inverse(const Mat3& a, double tol) {
  const double scale = std::max(max_abs(a), 1e-300);
  const double d = det(a);
  TZ_REQUIRE(std::abs(d) > tol * scale * scale * scale, singular,
             "matrix is singular (det = ", d, ")");
  Mat3 inv;
  inv(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
  inv(0, 1) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
  inv(0, 2) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
  inv(1, 0) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
  inv(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
  inv(1, 2) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
  inv(2, 0) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
  inv(2, 1) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
  inv(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  return inv * (1.0 / d);
}

double max_abs(const Mat3& a) {
  double m = 0.0;
  for (double v : a.m) m = std::max(m, std::abs(v));
  return m;
}

namespace {

// Null vector of (A - lambda I) assuming lambda is a simple eigenvalue.
Vec3 simple_eigenvector(const Mat3& a, double lambda) {
  Mat3 s = a - Mat3::identity() * lambda;
  const Vec3 r0 = s.row(0), r1 = s.row(1), r2 = s.row(2);
  Vec3 best = cross(r0, r1);
  double bn = dot(best, best);
  for (const Vec3& c : {cross(r0, r2), cross(r1, r2)}) {
    const double cn = dot(c, c);
    if (cn > bn) {
      best = c;
      bn = cn;
    }
  }
  return best * (1.0 / std::sqrt(bn));
}

Vec3 any_orthogonal(const Vec3& v) {
  const Vec3 axis = std::abs(v.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  return normalized(cross(v, axis));
}

// Eigenvalues from the trigonometric solution of the characteristic cubic.
// Accurate to ~sqrt(eps) near repeated roots; only used to pick the most
// isolated eigenvalue.
std::array<double, 3> cubic_roots(const Mat3& a, double p1) {
  const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  const Mat3 b = (a - Mat3::identity() * q) * (1.0 / p);
  const double r = std::clamp(det(b) / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double hi = q + 2.0 * p * std::cos(phi);
  const double lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return {lo, 3.0 * q - hi - lo, hi};
}

}  // namespace

SymEigen sym_eigen(const Mat3& a) {
  SymEigen out;
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double scale = std::max(max_abs(a), 1e-300);
  if (p1 <= 1e-30 * scale * scale) {
    std::array<std::pair<double, int>, 3> d{{{a(0, 0), 0}, {a(1, 1), 1}, {a(2, 2), 2}}};
    std::sort(d.begin(), d.end());
    for (int i = 0; i < 3; ++i) {
      out.values[i] = d[i].first;
      Vec3 e;
      e[d[i].second] = 1.0;
      for (int r = 0; r < 3; ++r) out.vectors(r, i) = e[r];
    }
    return out;
  }
  const auto l = cubic_roots(a, p1);
  if (l[2] - l[0] <= 1e-14 * scale) {
    const double m = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
    out.values = {m, m, m};
    out.vectors = Mat3::identity();
    return out;
  }
  // Deflate on the most isolated root: its eigenvector is well conditioned,
  // the Rayleigh quotient restores full precision, and the remaining 2x2
  // block has a stable closed form.
  const double iso = (l[1] - l[0] > l[2] - l[1]) ? l[0] : l[2];
  const Vec3 u = simple_eigenvector(a, iso);
  const double lu = dot(u, a * u);
  const Vec3 e1 = any_orthogonal(u);
  const Vec3 e2 = cross(u, e1);
  const double b11 = dot(e1, a * e1), b12 = dot(e1, a * e2), b22 = dot(e2, a * e2);
  const double mean = 0.5 * (b11 + b22);
  const double rad = std::hypot(0.5 * (b11 - b22), b12);
  const double theta = 0.5 * std::atan2(2.0 * b12, b11 - b22);
  const Vec3 big = e1 * std::cos(theta) + e2 * std::sin(theta);
  const Vec3 small = cross(u, big);

  std::array<std::pair<double, Vec3>, 3> ev{{{lu, u}, {mean + rad, big}, {mean - rad, small}}};
  std::sort(ev.begin(), ev.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  for (int i = 0; i < 3; ++i) out.values[i] = ev[i].first;
  out.vectors = Mat3::from_columns(normalized(ev[0].second), normalized(ev[1].second),
                                   normalized(ev[2].second));
  return out;
}

}  // namespace tetzero
