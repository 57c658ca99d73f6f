#pragma once

#include <array>

namespace fenn {

struct QuadPoint {
  double x, y, w;  // reference-triangle coordinates and weight (weights sum to 1/2)
};

// Dunavant rules on the reference triangle {x,y >= 0, x+y <= 1}.

/// Exact for polynomials up to degree 4 (6 points).
inline constexpr std::array<QuadPoint, 6> kQuadDegree4 = [] {
  constexpr double w1 = 0.223381589678011 * 0.5;
  constexpr double a1 = 0.445948490915965;
  constexpr double b1 = 0.108103018168070;
  constexpr double w2 = 0.109951743655322 * 0.5;
  constexpr double a2 = 0.091576213509771;
  constexpr double b2 = 0.816847572980459;
  return std::array<QuadPoint, 6>{{
      {b1, a1, w1}, {a1, b1, w1}, {a1, a1, w1},
      {b2, a2, w2}, {a2, b2, w2}, {a2, a2, w2},
  }};
}();

/// Exact for polynomials up to degree 6 (12 points).
inline constexpr std::array<QuadPoint, 12> kQuadDegree6 = [] {
  constexpr double w1 = 0.116786275726379 * 0.5;
  constexpr double a1 = 0.249286745170910;
  constexpr double b1 = 0.501426509658179;
  constexpr double w2 = 0.050844906370207 * 0.5;
  constexpr double a2 = 0.063089014491502;
  constexpr double b2 = 0.873821971016996;
  constexpr double w3 = 0.082851075618374 * 0.5;
  constexpr double p = 0.053145049844817;
  constexpr double q = 0.310352451033784;
  constexpr double r = 0.636502499121399;
  return std::array<QuadPoint, 12>{{
      {b1, a1, w1}, {a1, b1, w1}, {a1, a1, w1},
      {b2, a2, w2}, {a2, b2, w2}, {a2, a2, w2},
      {p, q, w3}, {q, p, w3}, {p, r, w3},
      {r, p, w3}, {q, r, w3}, {r, q, w3},
  }};
}();

/// Scalar P2 basis on the reference triangle, ordered: vertices (0,0), (1,0),
/// (0,1), then midpoints of edges (0,1), (1,2), (2,0).
inline std::array<double, 6> p2_basis(double x, double y) {
  const double l0 = 1.0 - x - y, l1 = x, l2 = y;
  return {l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
          4 * l0 * l1, 4 * l1 * l2, 4 * l0 * l2};
}

/// Reference-coordinate gradients of the P2 basis.
inline std::array<std::array<double, 2>, 6> p2_grad(double x, double y) {
  const double l0 = 1.0 - x - y;
  return {{
      {1 - 4 * l0, 1 - 4 * l0},
      {4 * x - 1, 0},
      {0, 4 * y - 1},
      {4 * (l0 - x), -4 * x},
      {4 * y, 4 * x},
      {-4 * y, 4 * (l0 - y)},
  }};
}

/// Scalar P1 basis (barycentric coordinates).
inline std::array<double, 3> p1_basis(double x, double y) {
  return {1.0 - x - y, x, y};
}

inline constexpr std::array<std::array<double, 2>, 3> kP1Grad = {{{-1, -1}, {1, 0}, {0, 1}}};

}  // namespace fenn
