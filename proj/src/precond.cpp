#include "tetzero/precond.hpp"

#include <algorithm>
#include <cmath>

#include "tetzero/error.hpp"
#include "tetzero/grid.hpp"

namespace tetzero {

Mat3 tetra_metric(const Mat3& c) {
  const Mat3 ci = inverse(c);
  return ci.transposed() * ci;
}

std::array<Mat3, 6> canonical_tetra_edges() {
  std::array<Mat3, 6> out;
  for (int t = 0; t < 6; ++t) {
    const auto v = tetra_corner_offsets(t);
    auto col = [&](int i) {
      return Vec3(v[i][0] - v[0][0], v[i][1] - v[0][1], v[i][2] - v[0][2]);
    };
    out[t] = Mat3::from_columns(col(1), col(2), col(3));
  }
  return out;
}

Mat3 cube_average_metric(const std::array<Mat3, 6>& edges) {
  Mat3 m;
  for (const Mat3& c : edges) m = m + tetra_metric(c);
  return m * (1.0 / 6.0);
}

Mat3 cube_average_metric() { return cube_average_metric(canonical_tetra_edges()); }

Mat3 symmetrize(const Mat3& m) {
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  Mat3 s;
  for (const auto& p : perms) {
    Mat3 pm;
    for (int r = 0; r < 3; ++r) pm(r, p[r]) = 1.0;
    s = s + pm * m * pm.transposed();
  }
  return s * (1.0 / 6.0);
}

namespace {

void require_spd(const Mat3& m, const SymEigen& e) {
  const double scale = std::max(max_abs(m), 1e-300);
  TZ_REQUIRE(max_abs(m - m.transposed()) <= 1e-12 * scale, invalid_argument,
             "metric is not symmetric");
  TZ_REQUIRE(e.values[0] > 0.0, invalid_argument, "metric is not positive definite (lambda_min = ",
             e.values[0], ")");
}

}  // namespace

double condition_number(const Mat3& m) {
  const SymEigen e = sym_eigen(m);
  require_spd(m, e);
  return e.values[2] / e.values[0];
}

Preconditioner solve_preconditioner(const Mat3& m_sym) {
  const SymEigen e = sym_eigen(m_sym);
  require_spd(m_sym, e);
  // M^{-1/2} = V diag(lambda^{-1/2}) V^T; det = prod lambda^{-1/2}
  Mat3 d;
  double det_inv_sqrt = 1.0;
  for (int i = 0; i < 3; ++i) {
    d(i, i) = 1.0 / std::sqrt(e.values[i]);
    det_inv_sqrt *= d(i, i);
  }
  const double s = 1.0 / std::cbrt(det_inv_sqrt);
  Preconditioner p;
  p.A = e.vectors * d * e.vectors.transposed() * s;
  p.c = s * s;
  return p;
}

Mat3 reference_preconditioner() {
  const double k = std::cbrt(7.0) / 3.0;
  const double diag = k * (1.0 + 2.0 / std::sqrt(7.0));
  const double off = k * (1.0 - 1.0 / std::sqrt(7.0));
  return Mat3::from_rows({diag, off, off}, {off, diag, off}, {off, off, diag});
}

Vec3 InputMap::invert(const Vec3& y) const { return inverse(M) * (y - t); }

InputMap make_input_map(const Vec3& box_lo, const Vec3& box_hi, const Mat3* A) {
  for (int k = 0; k < 3; ++k)
    TZ_REQUIRE(box_hi[k] > box_lo[k], invalid_argument, "scene box is empty along axis ", k);
  // u = D (x - lo)
  Mat3 D;
  for (int k = 0; k < 3; ++k) D(k, k) = 1.0 / (box_hi[k] - box_lo[k]);
  InputMap map;
  if (!A) {
    map.M = D;
    map.t = -(D * box_lo);
    return map;
  }
  double rowsum = 0.0;
  for (int r = 0; r < 3; ++r)
    rowsum = std::max(rowsum, std::abs((*A)(r, 0)) + std::abs((*A)(r, 1)) + std::abs((*A)(r, 2)));
  const double shrink = 1.0 / rowsum;
  const Mat3 S = (*A) * shrink;
  // y = S (D (x - lo) - 1/2) + 1/2
  map.M = S * D;
  const Vec3 half{0.5, 0.5, 0.5};
  map.t = half - S * half - map.M * box_lo;
  return map;
}

std::vector<ConditionRow> condition_table() {
  const auto edges = canonical_tetra_edges();
  const Mat3 m_sym = symmetrize(cube_average_metric(edges));
  const Preconditioner p = solve_preconditioner(m_sym);
  auto after = [&](const Mat3& m) { return condition_number(p.A.transposed() * m * p.A); };
  std::vector<ConditionRow> rows;
  rows.push_back({"M_sym", condition_number(m_sym), after(m_sym)});
  for (int t = 0; t < 6; ++t) {
    const Mat3 mt = tetra_metric(edges[t]);
    rows.push_back({"S" + std::to_string(t), condition_number(mt), after(mt)});
  }
  return rows;
}

}  // namespace tetzero
