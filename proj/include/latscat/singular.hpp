#pragma once

#include <vector>

#include "latscat/common.hpp"
#include "latscat/quadrature.hpp"

namespace latscat {

/// Closed-form integrals of the static Laplace kernel over the flat triangle
/// (a, b, c) with unit normal n: pot = int 1/|x-y| dy and grad = its gradient
/// in x. Valid for any x not on the triangle's edges; for x inside the
/// triangle's own plane the normal part of grad is taken as zero.
void static_triangle_integrals(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& n, const Vec3& x,
                               double& pot, Vec3& grad);

/// Gauss points on [0, 1] geometrically graded toward 0: the intervals
/// [0, s^L], [s^L, s^(L-1)], ..., [s, 1] each carry an n-point Gauss rule.
GaussLegendre graded_gauss(int levels, double ratio, int n);

/// Fan rule over triangle (a, b, c) about `anchor` (a point of the triangle).
/// The radial coordinate uses `radial` (graded toward the anchor) or, when
/// `toward_rim` is set, its mirror image (graded toward the sides opposite the
/// anchor). Degenerate fan pieces are skipped.
void fan_points(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& anchor, const GaussLegendre& radial,
                const GaussLegendre& angular, bool toward_rim, std::vector<WeightedPoint>& out);

}  // namespace latscat
