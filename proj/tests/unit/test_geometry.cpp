#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "latscat/errors.hpp"
#include "latscat/grid.hpp"
#include "latscat/marching_cubes.hpp"
#include "latscat/mesh.hpp"
#include "latscat/quadrature.hpp"

using namespace latscat;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Integral of x^a y^b over the reference triangle, divided by its area 1/2.
double monomial_mean(int a, int b) { return 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2); }

GridSpec cube_grid(double h) {
  GridSpec g;
  g.h = h;
  return g;
}

auto sphere_sdf(double r, Vec3 c = Vec3::Zero()) {
  return [r, c](const Vec3& x) { return (x - c).norm() - r; };
}

}  // namespace

TEST_CASE("triangle rules integrate monomials up to their order") {
  std::vector<QuadratureRule> rules = {centroid_rule(), strang_fix_rule(), dunavant4_rule(), dunavant5_rule(),
                                       collapsed_gauss_rule(4), collapsed_gauss_rule(7)};
  for (const auto& rule : rules) {
    double wsum = 0.0;
    for (double w : rule.weights) wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
    for (int a = 0; a <= rule.order; ++a) {
      for (int b = 0; a + b <= rule.order; ++b) {
        double q = 0.0;
        for (std::size_t p = 0; p < rule.size(); ++p) {
          q += rule.weights[p] * std::pow(rule.points[p][0], a) * std::pow(rule.points[p][1], b);
        }
        CHECK(std::abs(q - monomial_mean(a, b)) < 1e-12);
      }
    }
  }
}

TEST_CASE("gauss-legendre on [0,1] is exact to degree 2n-1") {
  for (int n : {1, 2, 5, 12}) {
    const auto gl = gauss_legendre(n);
    for (int d = 0; d <= 2 * n - 1; ++d) {
      double q = 0.0;
      for (int i = 0; i < n; ++i) q += gl.weights[i] * std::pow(gl.nodes[i], d);
      CHECK(std::abs(q - 1.0 / (d + 1)) < 1e-13);
    }
  }
}

TEST_CASE("duffy points integrate the 1/r singularity about an interior anchor") {
  // Unit right triangle, anchor at a vertex: integral of 1/|y| equals
  // int_0^{pi/2} int_0^{1/(cos t + sin t)} dr dt = sqrt(2) * asinh(1).
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  std::vector<WeightedPoint> pts;
  duffy_points(a, b, c, a, gauss_legendre(20), pts);
  double area = 0.0;
  double q = 0.0;
  for (const auto& wp : pts) {
    area += wp.weight;
    q += wp.weight / wp.point.norm();
  }
  CHECK(area == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(q == doctest::Approx(std::sqrt(2.0) * std::asinh(1.0)).epsilon(1e-10));

  // Interior anchor: splitting into three sub-triangles still tiles the face.
  pts.clear();
  duffy_points(a, b, c, Vec3(0.2, 0.3, 0.0), gauss_legendre(6), pts);
  area = 0.0;
  for (const auto& wp : pts) area += wp.weight;
  CHECK(area == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("quadrature_points carries face areas and stays on the face plane") {
  const TriangleMesh mesh = marching_cubes(sphere_sdf(0.5), cube_grid(0.12));
  const auto q = quadrature_points(mesh, strang_fix_rule());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    double wf = 0.0;
    for (std::size_t p = 0; p < q.per_face; ++p) {
      wf += q.weights[f * q.per_face + p];
      const double off = (q.points[f * q.per_face + p] - mesh.centroid(f)).dot(mesh.normal(f));
      CHECK(std::abs(off) < 1e-14);
    }
    CHECK(wf == doctest::Approx(mesh.area(f)).epsilon(1e-14));
    total += wf;
  }
  CHECK(total == doctest::Approx(mesh.total_area()).epsilon(1e-13));
}

TEST_CASE("linear integrand over one face is exact") {
  const TriangleMesh tri({Vec3(0.1, 0.2, 0.3), Vec3(1.1, -0.4, 0.7), Vec3(0.5, 0.9, -0.2)}, {Face{0, 1, 2}});
  const auto q = quadrature_points(tri, strang_fix_rule());
  auto g = [](const Vec3& x) { return 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2] + 1.0; };
  double sum = 0.0;
  for (std::size_t p = 0; p < q.per_face; ++p) sum += q.weights[p] * g(q.points[p]);
  // Linear functions integrate to area times the centroid value.
  CHECK(sum == doctest::Approx(tri.area(0) * g(tri.centroid(0))).epsilon(1e-14));
}

TEST_CASE("integral of |x|^2 over sphere meshes converges to 4 pi r^4") {
  const double r = 0.5;
  const double exact = 4.0 * kPi * std::pow(r, 4);
  double prev = std::numeric_limits<double>::infinity();
  for (double h : {0.12, 0.06, 0.03}) {
    const TriangleMesh mesh = marching_cubes(sphere_sdf(r), cube_grid(h));
    const auto q = quadrature_points(mesh, dunavant4_rule());
    double sum = 0.0;
    for (std::size_t i = 0; i < q.points.size(); ++i) sum += q.weights[i] * q.points[i].squaredNorm();
    const double err = std::abs(sum - exact) / exact;
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 0.01);
}

TEST_CASE("marching cubes on a sphere") {
  const double r = 0.5;
  const TriangleMesh coarse = marching_cubes(sphere_sdf(r), cube_grid(0.06));
  CHECK(coarse.boundary_edge_count() == 0);
  CHECK(coarse.is_closed_oriented());
  const double area_err = std::abs(coarse.total_area() - kPi) / kPi;
  CHECK(area_err < 0.03);
  CHECK(std::abs(mesh_volume(coarse) - 4.0 / 3.0 * kPi * r * r * r) / (4.0 / 3.0 * kPi * r * r * r) < 0.05);
  for (const auto& v : coarse.vertices()) CHECK(std::abs(v.norm() - r) <= 0.06);

  const TriangleMesh fine = marching_cubes(sphere_sdf(r), cube_grid(0.03));
  const double fine_err = std::abs(fine.total_area() - kPi) / kPi;
  CHECK(fine_err < area_err);
  CHECK(mesh_volume(fine.flipped()) == doctest::Approx(-mesh_volume(fine)).epsilon(1e-14));
  MESSAGE("sphere faces h=0.06: " << coarse.face_count() << ", h=0.03: " << fine.face_count());
}

TEST_CASE("ellipsoid volume") {
  const Vec3 a(0.5, 0.4, 0.3);
  auto f = [a](const Vec3& x) { return x.cwiseQuotient(a).norm() - 1.0; };
  const TriangleMesh mesh = marching_cubes(f, cube_grid(0.06));
  const double exact = 4.0 / 3.0 * kPi * 0.06;
  CHECK(std::abs(mesh_volume(mesh) - exact) / exact < 0.05);
  CHECK(mesh.is_closed_oriented());
}

TEST_CASE("marching cubes error paths") {
  CHECK_THROWS_AS(marching_cubes([](const Vec3&) { return 1.0; }, cube_grid(0.1)), NoSurface);
  CHECK_THROWS_AS(marching_cubes([](const Vec3&) { return -1.0; }, cube_grid(0.1)), NoSurface);
  CHECK_THROWS_AS(marching_cubes(sphere_sdf(1.2), cube_grid(0.1)), OpenSurface);
  GridSpec bad;
  bad.h = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("marching cubes output is closed and outward for random blobby fields") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uc(-0.4, 0.4);
  std::uniform_real_distribution<double> ur(0.08, 0.3);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<std::pair<Vec3, double>> balls;
    const int nb = 1 + trial % 5;
    for (int b = 0; b < nb; ++b) balls.push_back({Vec3(uc(rng), uc(rng), uc(rng)), ur(rng)});
    auto f = [&balls](const Vec3& x) {
      double s = 0.0;
      for (const auto& [c, r] : balls) s += std::exp(-(x - c).squaredNorm() / (r * r));
      return 0.5 - s;
    };
    const double h = trial % 2 ? 0.07 : 0.11;
    try {
      const TriangleMesh mesh = marching_cubes(f, cube_grid(h));
      CHECK(mesh.boundary_edge_count() == 0);
      CHECK(mesh.is_closed_oriented());
      CHECK(mesh_volume(mesh) > 0.0);
      for (const auto& v : mesh.vertices()) CHECK(std::abs(f(v)) < 0.5);
    } catch (const NoSurface&) {
      // Blobs too small to cross the threshold on this lattice.
    }
  }
}

TEST_CASE("case table is consistent under complement") {
  // Complementing all corner signs must reverse every triangle's orientation
  // except on ambiguous faces; check the number of triangles matches where no
  // face is ambiguous.
  const auto& table = marching_cubes_table();
  CHECK(table[0].empty());
  CHECK(table[255].empty());
  CHECK(table[1].size() == 1);
  CHECK(table[3].size() == 2);
}

TEST_CASE("OBJ round trip and point inclusion") {
  const TriangleMesh mesh = marching_cubes(sphere_sdf(0.4, Vec3(0.1, 0.0, -0.05)), cube_grid(0.1));
  const auto path = std::filesystem::temp_directory_path() / "latscat_roundtrip.obj";
  write_obj(mesh, path);
  const TriangleMesh back = read_obj(path);
  REQUIRE(back.face_count() == mesh.face_count());
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) CHECK(back.vertices()[i] == mesh.vertices()[i]);
  CHECK(back.is_closed_oriented());
  CHECK(point_inside(back, Vec3(0.1, 0.0, -0.05)));
  CHECK_FALSE(point_inside(back, Vec3(0.9, 0.0, 0.0)));
  std::filesystem::remove(path);
}
