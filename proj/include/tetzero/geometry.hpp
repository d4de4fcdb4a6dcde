#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace tetzero {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return a * (1.0 / norm(a)); }

// Row-major 3x3.
struct Mat3 {
  std::array<double, 9> m{};

  constexpr double& operator()(int r, int c) { return m[3 * r + c]; }
  constexpr double operator()(int r, int c) const { return m[3 * r + c]; }

  static constexpr Mat3 identity() {
    Mat3 a;
    a(0, 0) = a(1, 1) = a(2, 2) = 1.0;
    return a;
  }
  static constexpr Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    Mat3 a;
    for (int r = 0; r < 3; ++r) {
      a(r, 0) = c0[r];
      a(r, 1) = c1[r];
      a(r, 2) = c2[r];
    }
    return a;
  }
  static constexpr Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
    return from_columns(r0, r1, r2).transposed();
  }

  constexpr Vec3 column(int c) const { return {(*this)(0, c), (*this)(1, c), (*this)(2, c)}; }
  constexpr Vec3 row(int r) const { return {(*this)(r, 0), (*this)(r, 1), (*this)(r, 2)}; }

  constexpr Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
  }

  friend constexpr Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 p;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += a(r, k) * b(k, c);
        p(r, c) = s;
      }
    return p;
  }
  friend constexpr Vec3 operator*(const Mat3& a, const Vec3& v) {
    return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
            a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
            a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
  }
  friend constexpr Mat3 operator+(Mat3 a, const Mat3& b) {
    for (int i = 0; i < 9; ++i) a.m[i] += b.m[i];
    return a;
  }
  friend constexpr Mat3 operator-(Mat3 a, const Mat3& b) {
    for (int i = 0; i < 9; ++i) a.m[i] -= b.m[i];
    return a;
  }
  friend constexpr Mat3 operator*(Mat3 a, double s) {
    for (double& v : a.m) v *= s;
    return a;
  }
};

constexpr double det(const Mat3& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

/// Inverse via the adjugate. Throws tetzero::Error when |det| <= tol * scale^3.
Mat3 inverse(const Mat3& a, double tol = 1e-14);

/// Max absolute entry.
double max_abs(const Mat3& a);

struct SymEigen {
  Vec3 values;  // ascending
  Mat3 vectors; // columns are unit eigenvectors matching `values`
};

/// Closed-form eigendecomposition of a symmetric 3x3 matrix: trigonometric
/// cubic roots, one deflation step on the most isolated root, then an exact
/// 2x2 rotation. Eigenvector columns form a right-handed orthonormal frame.
SymEigen sym_eigen(const Mat3& a);

}  // namespace tetzero
