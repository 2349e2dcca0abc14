#pragma once

#include <vector>

#include "latscat/common.hpp"
#include "latscat/mesh.hpp"

namespace latscat {

/// Points (l1, l2) in barycentric form on the reference triangle, with
/// weights normalised to sum to one. The third coordinate is 1 - l1 - l2.
struct QuadratureRule {
  std::vector<Eigen::Vector2d> points;
  std::vector<double> weights;
  int order = 0;

  std::size_t size() const { return points.size(); }
};

/// Gauss-Legendre nodes and weights on [0, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussLegendre gauss_legendre(int n);

QuadratureRule centroid_rule();
/// 3-point rule exact for degree 2.
QuadratureRule strang_fix_rule();
/// 6-point Dunavant rule exact for degree 4.
QuadratureRule dunavant4_rule();
/// 7-point Dunavant rule exact for degree 5.
QuadratureRule dunavant5_rule();
/// Collapsed (Duffy) tensor Gauss rule with n^2 points, exact for degree 2n-2.
QuadratureRule collapsed_gauss_rule(int n);

/// Point on triangle (a, b, c) at barycentric (l1, l2) = weight on b, c.
inline Vec3 triangle_point(const Vec3& a, const Vec3& b, const Vec3& c, const Eigen::Vector2d& l) {
  return a + l[0] * (b - a) + l[1] * (c - a);
}

struct FaceQuadrature {
  std::vector<Vec3> points;     // face-major, rule.size() points per face
  std::vector<double> weights;  // physical weights; per face they sum to the face area
  std::size_t per_face = 0;
};

FaceQuadrature quadrature_points(const TriangleMesh& mesh, const QuadratureRule& rule);

/// A point with a physical weight, used for singular integration.
struct WeightedPoint {
  Vec3 point;
  double weight;
};

/// Integration points for a function with a 1/|y - anchor| type singularity
/// over triangle (a, b, c). The triangle is split into sub-triangles sharing
/// `anchor` (which must lie in the triangle's plane and inside it) and each is
/// integrated with a Duffy-collapsed n x n Gauss rule. Degenerate
/// sub-triangles are skipped.
void duffy_points(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& anchor, const GaussLegendre& gl,
                  std::vector<WeightedPoint>& out);

/// Closest point to `p` on triangle (a, b, c).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace latscat
