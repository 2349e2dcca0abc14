#include "latscat/singular.hpp"

#include <cmath>

namespace latscat {

void static_triangle_integrals(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& n, const Vec3& x,
                               double& pot, Vec3& grad) {
  const Vec3* v[3] = {&a, &b, &c};
  const double h = n.dot(x - a);
  const double ah = std::abs(h);
  const Vec3 proj = x - h * n;
  double solid = 0.0;
  pot = 0.0;
  grad.setZero();
  for (int e = 0; e < 3; ++e) {
    const Vec3& p0 = *v[e];
    const Vec3& p1 = *v[(e + 1) % 3];
    const Vec3 edge = p1 - p0;
    const double len = edge.norm();
    const Vec3 tang = edge / len;
    const Vec3 out = tang.cross(n);  // in-plane, pointing away from the triangle
    const double s0 = (p0 - proj).dot(tang);
    const double s1 = s0 + len;
    const double d = (p0 - proj).dot(out);
    const double q2 = d * d + h * h;
    const double r0 = std::sqrt(s0 * s0 + q2);
    const double r1 = std::sqrt(s1 * s1 + q2);
    // r + s and r - s rewritten as q2 / (r -+ s) where they would cancel;
    // slivers put interior points within rounding distance of an edge line.
    auto plus = [q2](double s, double r) { return s >= 0.0 ? r + s : q2 / (r - s); };
    auto minus = [q2](double s, double r) { return s <= 0.0 ? r - s : q2 / (r + s); };
    const double lg =
        (s0 + s1 >= 0.0) ? std::log(plus(s1, r1) / plus(s0, r0)) : std::log(minus(s0, r0) / minus(s1, r1));
    pot += d * lg;
    grad -= lg * out;
    solid += std::atan2(d * s1, q2 + ah * r1) - std::atan2(d * s0, q2 + ah * r0);
  }
  pot -= ah * solid;
  if (h != 0.0) grad -= (h > 0.0 ? solid : -solid) * n;
}

GaussLegendre graded_gauss(int levels, double ratio, int n) {
  const GaussLegendre base = gauss_legendre(n);
  GaussLegendre out;
  double hi = 1.0;
  for (int l = 0; l <= levels; ++l) {
    const double lo = l == levels ? 0.0 : hi * ratio;
    for (int i = 0; i < n; ++i) {
      out.nodes.push_back(lo + (hi - lo) * base.nodes[i]);
      out.weights.push_back((hi - lo) * base.weights[i]);
    }
    hi = lo;
  }
  return out;
}

void fan_points(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& anchor, const GaussLegendre& radial,
                const GaussLegendre& angular, bool toward_rim, std::vector<WeightedPoint>& out) {
  const Vec3* v[3] = {&a, &b, &c};
  const double full = (b - a).cross(c - a).norm();
  for (int e = 0; e < 3; ++e) {
    const Vec3& p = *v[e];
    const Vec3& q = *v[(e + 1) % 3];
    const double twice_area = (p - anchor).cross(q - anchor).norm();
    if (twice_area <= 1e-12 * full) continue;
    for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
      const double u = toward_rim ? 1.0 - radial.nodes[i] : radial.nodes[i];
      for (std::size_t j = 0; j < angular.nodes.size(); ++j) {
        const double w = angular.nodes[j];
        out.push_back({anchor + u * ((p - anchor) + w * (q - p)), twice_area * u * radial.weights[i] * angular.weights[j]});
      }
    }
  }
}

}  // namespace latscat
