#pragma once

// Encoder-induced metrics and the global volume-preserving input map that
// isotropizes their symmetrized cube average.

#include <array>
#include <string>
#include <vector>

#include "tetzero/geometry.hpp"

namespace tetzero {

/// M_T = C^{-T} C^{-1}.
Mat3 tetra_metric(const Mat3& c);

/// Edge matrices C = [v1-v0, v2-v0, v3-v0] of the six unit-cube tetrahedra
/// of the grid convention.
std::array<Mat3, 6> canonical_tetra_edges();

/// (1/6) sum of tetra_metric over the six canonical tetrahedra.
Mat3 cube_average_metric();
Mat3 cube_average_metric(const std::array<Mat3, 6>& edges);

/// Average of P M P^T over the six 3x3 permutation matrices.
Mat3 symmetrize(const Mat3& m);

/// lambda_max / lambda_min; throws unless symmetric positive definite.
double condition_number(const Mat3& m);

struct Preconditioner {
  Mat3 A = Mat3::identity();
  Vec3 t;
  double c = 1.0;  // A^T M_sym A = c I
};

/// A* = s M_sym^{-1/2} with det(A*) = 1, c = s^2.
Preconditioner solve_preconditioner(const Mat3& m_sym);

/// Closed form for the Kuhn average: entries (7^{1/3}/3) * (...).
Mat3 reference_preconditioner();

/// Affine scene -> grid map y = M x + t.
struct InputMap {
  Mat3 M = Mat3::identity();
  Vec3 t;

  Vec3 apply(const Vec3& x) const { return M * x + t; }
  Vec3 invert(const Vec3& y) const;
  /// Gradient of f(x) = g(apply(x)) from the gradient of g.
  Vec3 pull_gradient(const Vec3& grad_y) const { return M.transposed() * grad_y; }
};

/// Scene box -> unit cube, then optionally y = shrink * A (u - 1/2) + 1/2 with
/// shrink = 1 / max row sum of |A| so the image stays inside [0,1]^3.
InputMap make_input_map(const Vec3& box_lo, const Vec3& box_hi, const Mat3* A);

struct ConditionRow {
  std::string name;
  double before = 0.0;
  double after = 0.0;
};

/// kappa before / after A* for M_sym and the six canonical tetrahedra.
std::vector<ConditionRow> condition_table();

}  // namespace tetzero
