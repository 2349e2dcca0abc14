#include "latscat/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace latscat {

GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  GaussLegendre gl;
  gl.nodes.resize(n);
  gl.weights.resize(n);
  // Newton iteration on P_n from the Chebyshev-like initial guess, then map to [0, 1].
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      // Recompute derivative at the converged node.
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    gl.nodes[i] = 0.5 * (1.0 - x);
    gl.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return gl;
}

QuadratureRule centroid_rule() {
  return {{Eigen::Vector2d(1.0 / 3.0, 1.0 / 3.0)}, {1.0}, 1};
}

QuadratureRule strang_fix_rule() {
  QuadratureRule r;
  r.order = 2;
  r.points = {{1.0 / 6.0, 1.0 / 6.0}, {2.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 2.0 / 3.0}};
  r.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return r;
}

namespace {

void add_orbit3(QuadratureRule& r, double a, double b, double w) {
  // Permutations of barycentric (a, a, b); stored as weights on vertices 1 and 2.
  r.points.emplace_back(a, a);
  r.points.emplace_back(a, b);
  r.points.emplace_back(b, a);
  r.weights.insert(r.weights.end(), {w, w, w});
}

}  // namespace

QuadratureRule dunavant4_rule() {
  QuadratureRule r;
  r.order = 4;
  const double a1 = 0.44594849091596488632;
  const double a2 = 0.09157621350977074346;
  add_orbit3(r, a1, 1.0 - 2.0 * a1, 0.22338158967801146570);
  add_orbit3(r, a2, 1.0 - 2.0 * a2, 0.10995174365532186764);
  return r;
}

QuadratureRule dunavant5_rule() {
  QuadratureRule r;
  r.order = 5;
  r.points.emplace_back(1.0 / 3.0, 1.0 / 3.0);
  r.weights.push_back(0.225);
  const double s15 = std::sqrt(15.0);
  const double a1 = (6.0 + s15) / 21.0;
  const double a2 = (6.0 - s15) / 21.0;
  add_orbit3(r, a1, 1.0 - 2.0 * a1, (155.0 + s15) / 1200.0);
  add_orbit3(r, a2, 1.0 - 2.0 * a2, (155.0 - s15) / 1200.0);
  return r;
}

QuadratureRule collapsed_gauss_rule(int n) {
  const GaussLegendre gl = gauss_legendre(n);
  QuadratureRule r;
  r.order = 2 * n - 2;  // the Jacobian u costs one degree
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = gl.nodes[i];
      const double w = gl.nodes[j];
      // y = u * ((1 - w) e1 + w e2), Jacobian u; reference area 1/2.
      r.points.emplace_back(u * (1.0 - w), u * w);
      r.weights.push_back(2.0 * gl.weights[i] * gl.weights[j] * u);
    }
  }
  return r;
}

FaceQuadrature quadrature_points(const TriangleMesh& mesh, const QuadratureRule& rule) {
  FaceQuadrature q;
  q.per_face = rule.size();
  q.points.reserve(mesh.face_count() * rule.size());
  q.weights.reserve(mesh.face_count() * rule.size());
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const Vec3& a = mesh.vertex(static_cast<int>(f), 0);
    const Vec3& b = mesh.vertex(static_cast<int>(f), 1);
    const Vec3& c = mesh.vertex(static_cast<int>(f), 2);
    for (std::size_t p = 0; p < rule.size(); ++p) {
      q.points.push_back(triangle_point(a, b, c, rule.points[p]));
      q.weights.push_back(rule.weights[p] * mesh.area(f));
    }
  }
  return q;
}

void duffy_points(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& anchor, const GaussLegendre& gl,
                  std::vector<WeightedPoint>& out) {
  const Vec3* corners[3] = {&a, &b, &c};
  const double full = 0.5 * (b - a).cross(c - a).norm();
  for (int e = 0; e < 3; ++e) {
    const Vec3& p = *corners[e];
    const Vec3& q = *corners[(e + 1) % 3];
    const double sub_area = 0.5 * (p - anchor).cross(q - anchor).norm();
    if (sub_area <= 1e-14 * full) continue;
    const std::size_t n = gl.nodes.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double u = gl.nodes[i];
      for (std::size_t j = 0; j < n; ++j) {
        const double w = gl.nodes[j];
        const Vec3 y = anchor + u * ((p - anchor) + w * (q - p));
        out.push_back({y, 2.0 * sub_area * u * gl.weights[i] * gl.weights[j]});
      }
    }
  }
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace latscat
