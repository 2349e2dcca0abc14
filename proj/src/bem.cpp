#include "latscat/bem.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "latscat/errors.hpp"
#include "latscat/quadrature.hpp"
#include "latscat/singular.hpp"
#include "kernels.hpp"

namespace latscat {

IncidentWave::IncidentWave(double k, std::vector<Complex> c, std::vector<Vec3> d, bool plane)
    : k_(k), coeffs_(std::move(c)), dirs_(std::move(d)), plane_(plane) {
  if (!(k_ > 0.0)) throw ConfigError("incident wave: wavenumber must be positive");
  if (coeffs_.size() != dirs_.size()) throw DimensionMismatch("incident wave: coefficient/direction count mismatch");
  for (const auto& e : dirs_) {
    if (std::abs(e.norm() - 1.0) > 1e-9) throw ConfigError("incident wave: directions must be unit vectors");
  }
}

IncidentWave IncidentWave::plane(double k, const Vec3& d) { return IncidentWave(k, {Complex(1.0, 0.0)}, {d}, true); }

IncidentWave IncidentWave::superposition(double k, std::vector<Complex> coefficients, std::vector<Vec3> directions) {
  return IncidentWave(k, std::move(coefficients), std::move(directions), false);
}

Complex IncidentWave::value(const Vec3& x) const {
  Complex u{0.0, 0.0};
  for (std::size_t m = 0; m < dirs_.size(); ++m) u += coeffs_[m] * std::exp(kI * k_ * x.dot(dirs_[m]));
  return u;
}

void IncidentWave::trace(const Vec3& x, const Vec3& n, Complex& u, Complex& dudn) const {
  u = 0.0;
  dudn = 0.0;
  for (std::size_t m = 0; m < dirs_.size(); ++m) {
    const Complex t = coeffs_[m] * std::exp(kI * k_ * x.dot(dirs_[m]));
    u += t;
    dudn += kI * k_ * n.dot(dirs_[m]) * t;
  }
}

namespace {

constexpr double kInv4Pi = 1.0 / (4.0 * kPi);

struct KernelWeights {
  Complex s;   // weight on the single-layer kernel
  Complex kp;  // weight on the adjoint double-layer kernel
};

KernelWeights operator_weights(BemOperator op, double k) {
  switch (op) {
    case BemOperator::kSingleLayer:
      return {1.0, 0.0};
    case BemOperator::kAdjointDoubleLayer:
      return {0.0, 1.0};
    case BemOperator::kBurtonMiller:
      break;
  }
  return {-kI * k, 1.0};
}

// Per-face quadrature points in structure-of-arrays form, face-major.
struct SoaPoints {
  std::vector<double> x, y, z, w, nx, ny, nz;
  std::size_t per_face = 0;

  void clear() {
    for (auto* v : {&x, &y, &z, &w, &nx, &ny, &nz}) v->clear();
  }
  void push(const Vec3& p, double wt, const Vec3& n) {
    x.push_back(p[0]);
    y.push_back(p[1]);
    z.push_back(p[2]);
    w.push_back(wt);
    nx.push_back(n[0]);
    ny.push_back(n[1]);
    nz.push_back(n[2]);
  }
  // Appends face f of `from`.
  void push_face(const SoaPoints& from, std::size_t f) {
    for (std::size_t q = f * from.per_face; q < (f + 1) * from.per_face; ++q) {
      push(Vec3(from.x[q], from.y[q], from.z[q]), from.w[q], Vec3(from.nx[q], from.ny[q], from.nz[q]));
    }
  }
  Vec3 point(std::size_t q) const { return {x[q], y[q], z[q]}; }
  detail::PointBlock block() const {
    return {x.data(), y.data(), z.data(), w.data(), nx.data(), ny.data(), nz.data(), x.size()};
  }
};

SoaPoints soa_points(const TriangleMesh& mesh, const QuadratureRule& rule) {
  const auto q = quadrature_points(mesh, rule);
  SoaPoints s;
  s.per_face = q.per_face;
  for (std::size_t i = 0; i < q.points.size(); ++i) s.push(q.points[i], q.weights[i], mesh.normal(i / q.per_face));
  return s;
}

std::vector<double> bounding_radii(const TriangleMesh& mesh) {
  std::vector<double> r(mesh.face_count());
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    double m = 0.0;
    for (int c = 0; c < 3; ++c) m = std::max(m, (mesh.vertex(static_cast<int>(f), c) - mesh.centroid(f)).norm());
    r[f] = m;
  }
  return r;
}

int shared_vertices(const Face& a, const Face& b) {
  int count = 0;
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q) count += a[p] == b[q];
  }
  return count;
}

// Outer points on face i for a near pair (i, j), graded toward where the
// inner integral over face j loses smoothness.
void near_outer_points(const TriangleMesh& mesh, std::size_t i, std::size_t j, const GaussLegendre& radial,
                       const GaussLegendre& angular, std::vector<WeightedPoint>& out) {
  const Face& fi = mesh.faces()[i];
  const Face& fj = mesh.faces()[j];
  const Vec3& a = mesh.vertices()[fi[0]];
  const Vec3& b = mesh.vertices()[fi[1]];
  const Vec3& c = mesh.vertices()[fi[2]];
  if (i == j) {
    fan_points(a, b, c, mesh.centroid(i), radial, angular, true, out);
    return;
  }
  int shared[3] = {0, 0, 0};
  int count = 0;
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q) {
      if (fi[p] == fj[q]) {
        shared[p] = 1;
        ++count;
      }
    }
  }
  if (count == 2) {
    // Anchor at the vertex off the shared edge; the edge is the fan's rim.
    const int apex = shared[0] == 0 ? 0 : (shared[1] == 0 ? 1 : 2);
    fan_points(a, b, c, mesh.vertices()[fi[apex]], radial, angular, true, out);
    return;
  }
  if (count == 1) {
    const int v = shared[0] ? 0 : (shared[1] ? 1 : 2);
    fan_points(a, b, c, mesh.vertices()[fi[v]], radial, angular, false, out);
    return;
  }
  // Separate but close: grade toward the point of face i nearest face j.
  Vec3 best = a;
  double best_d = std::numeric_limits<double>::infinity();
  const Vec3& pa = mesh.vertices()[fj[0]];
  const Vec3& pb = mesh.vertices()[fj[1]];
  const Vec3& pc = mesh.vertices()[fj[2]];
  for (int q = 0; q < 3; ++q) {
    const Vec3& y = mesh.vertices()[fj[q]];
    const Vec3 cp = closest_point_on_triangle(y, a, b, c);
    if ((cp - y).norm() < best_d) {
      best_d = (cp - y).norm();
      best = cp;
    }
    const Vec3& x = mesh.vertices()[fi[q]];
    const double dx = (closest_point_on_triangle(x, pa, pb, pc) - x).norm();
    if (dx < best_d) {
      best_d = dx;
      best = x;
    }
  }
  fan_points(a, b, c, best, radial, angular, false, out);
}

// Near pair: static parts over face j in closed form, remainder on the
// 6-point rule of face j.
Complex near_pair(const TriangleMesh& mesh, std::size_t i, std::size_t j, double k, const KernelWeights& w,
                  const std::vector<WeightedPoint>& outer, const SoaPoints& inner) {
  const int fj = static_cast<int>(j);
  const Vec3& a = mesh.vertex(fj, 0);
  const Vec3& b = mesh.vertex(fj, 1);
  const Vec3& c = mesh.vertex(fj, 2);
  const Vec3& ni = mesh.normal(i);
  const Vec3& nj = mesh.normal(j);
  const bool want_k = i != j && w.kp != 0.0;
  Complex s_acc{0.0, 0.0}, k_acc{0.0, 0.0};
  for (const auto& xo : outer) {
    double pot;
    Vec3 grad;
    static_triangle_integrals(a, b, c, nj, xo.point, pot, grad);
    Complex s_in = pot;
    Complex k_in = want_k ? Complex(ni.dot(grad), 0.0) : Complex(0.0, 0.0);
    for (std::size_t q = j * inner.per_face; q < (j + 1) * inner.per_face; ++q) {
      const Vec3 d = xo.point - inner.point(q);
      const double r = d.norm();
      const double kr = k * r;
      const double wq = inner.w[q];
      if (kr < 1e-3) {
        // Series forms of (e^{ikr} - 1)/r and (e^{ikr}(ikr - 1) + 1)/r^3.
        s_in += wq * k * Complex(-0.5 * kr, 1.0 - kr * kr / 6.0);
        if (want_k) k_in += wq * ni.dot(d) * k * k * Complex(-0.5, -kr / 3.0) / r;
      } else {
        const Complex e = std::polar(1.0, kr);
        s_in += wq * (e - 1.0) / r;
        if (want_k) k_in += wq * ni.dot(d) * (e * Complex(-1.0, kr) + 1.0) / (r * r * r);
      }
    }
    s_acc += xo.weight * s_in;
    k_acc += xo.weight * k_in;
  }
  return kInv4Pi * (w.s * s_acc + w.kp * k_acc);
}

// Adds the regular-rule contributions of face pairs (i, j) for all faces j
// listed in `src` (per_face points each) to fwd[t] = A_ij and rev[t] = A_ji.
struct PairAccumulator {
  std::vector<double> fr, fi, rr, ri;

  void run(const SoaPoints& outer, std::size_t i, double k, const double cs[2], const double ck[2],
           const detail::PointBlock& src, std::size_t per_face, Complex* fwd, Complex* rev) {
    fr.resize(src.size);
    fi.resize(src.size);
    rr.resize(src.size);
    ri.resize(src.size);
    const std::size_t faces = src.size / per_face;
    for (std::size_t p = i * outer.per_face; p < (i + 1) * outer.per_face; ++p) {
      const double x[3] = {outer.x[p], outer.y[p], outer.z[p]};
      const double n[3] = {outer.nx[p], outer.ny[p], outer.nz[p]};
      detail::helmholtz_pair_row(x, n, k, cs, ck, src, fr.data(), fi.data(), rr.data(), ri.data());
      const double wx = outer.w[p];
      for (std::size_t t = 0; t < faces; ++t) {
        double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
        for (std::size_t q = t * per_face; q < (t + 1) * per_face; ++q) {
          a += fr[q];
          b += fi[q];
          c += rr[q];
          d += ri[q];
        }
        fwd[t] += wx * Complex(a, b);
        rev[t] += wx * Complex(c, d);
      }
    }
  }
};

}  // namespace

BemSystem assemble(const TriangleMesh& mesh, double k, const AssemblyOptions& options, BemOperator op) {
  if (!(k > 0.0)) throw ConfigError("assemble: wavenumber must be positive");
  const std::size_t n = mesh.face_count();
  if (n == 0) throw DegenerateMesh("assemble: mesh has no faces");

  BemSystem sys;
  sys.mesh = mesh;
  sys.k = k;
  sys.op = op;
  sys.options = options;
  sys.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  const KernelWeights kw = operator_weights(op, k);
  const double cs[2] = {kw.s.real(), kw.s.imag()};
  const double ck[2] = {kw.kp.real(), kw.kp.imag()};
  const SoaPoints far = soa_points(mesh, strang_fix_rule());
  const SoaPoints mid = soa_points(mesh, dunavant4_rule());
  const std::vector<double> rad = bounding_radii(mesh);
  const GaussLegendre radial = graded_gauss(options.radial_levels, options.radial_ratio, options.radial_order);
  const GaussLegendre angular = gauss_legendre(options.angular_order);

  // Row i fills A_ij for near faces j and, for j > i, both A_ij and A_ji of
  // regular pairs (the far and intermediate rules are symmetric in the two
  // faces, so one kernel evaluation serves both entries).
#pragma omp parallel
  {
    std::vector<WeightedPoint> outer;
    std::vector<std::size_t> mid_faces, near_faces;
    std::vector<char> kind(n);
    std::vector<Complex> fwd, rev, mfwd, mrev;
    SoaPoints gathered;
    gathered.per_face = mid.per_face;
    PairAccumulator acc;
#pragma omp for schedule(dynamic, 4)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
      const std::size_t i = static_cast<std::size_t>(ii);
      mid_faces.clear();
      near_faces.clear();
      for (std::size_t j = 0; j < n; ++j) {
        const double dist = (mesh.centroid(i) - mesh.centroid(j)).norm();
        const double scale = rad[i] + rad[j];
        if (shared_vertices(mesh.faces()[i], mesh.faces()[j]) > 0 || dist < options.near_factor * scale) {
          kind[j] = 2;
          near_faces.push_back(j);
        } else if (dist < options.mid_factor * scale) {
          kind[j] = 1;
          if (j > i) mid_faces.push_back(j);
        } else {
          kind[j] = 0;
        }
      }

      const std::size_t tail = n - i - 1;
      if (tail > 0) {
        fwd.assign(tail, 0.0);
        rev.assign(tail, 0.0);
        acc.run(far, i, k, cs, ck, far.block().offset((i + 1) * far.per_face, tail * far.per_face), far.per_face,
                fwd.data(), rev.data());
        if (!mid_faces.empty()) {
          gathered.clear();
          for (std::size_t j : mid_faces) gathered.push_face(mid, j);
          mfwd.assign(mid_faces.size(), 0.0);
          mrev.assign(mid_faces.size(), 0.0);
          acc.run(mid, i, k, cs, ck, gathered.block(), mid.per_face, mfwd.data(), mrev.data());
          for (std::size_t t = 0; t < mid_faces.size(); ++t) {
            fwd[mid_faces[t] - i - 1] = mfwd[t];
            rev[mid_faces[t] - i - 1] = mrev[t];
          }
        }
        for (std::size_t j = i + 1; j < n; ++j) {
          if (kind[j] == 2) continue;
          sys.matrix(ii, static_cast<Eigen::Index>(j)) = fwd[j - i - 1];
          sys.matrix(static_cast<Eigen::Index>(j), ii) = rev[j - i - 1];
        }
      }

      for (std::size_t j : near_faces) {
        outer.clear();
        near_outer_points(mesh, i, j, radial, angular, outer);
        Complex val = near_pair(mesh, i, j, k, kw, outer, mid);
        if (i == j && op == BemOperator::kBurtonMiller) val += 0.5 * mesh.area(i);
        sys.matrix(ii, static_cast<Eigen::Index>(j)) = val;
      }
    }
  }
  if (!sys.matrix.allFinite()) throw DegenerateMesh("assemble: non-finite matrix entries");
  return sys;
}

CVecX assemble_rhs(const TriangleMesh& mesh, const IncidentWave& incident) {
  const auto q = quadrature_points(mesh, dunavant4_rule());
  const double k = incident.k();
  CVecX b(static_cast<Eigen::Index>(mesh.face_count()));
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    Complex acc{0.0, 0.0};
    for (std::size_t p = 0; p < q.per_face; ++p) {
      Complex u, dudn;
      incident.trace(q.points[f * q.per_face + p], mesh.normal(f), u, dudn);
      acc += q.weights[f * q.per_face + p] * (dudn - kI * k * u);
    }
    b[static_cast<Eigen::Index>(f)] = acc;
  }
  return b;
}

SurfaceDensity solve_density(const BemSystem& system, const IncidentWave& incident, const GmresOptions& opt) {
  return solve_densities(system, {incident}, opt).front();
}

std::vector<SurfaceDensity> solve_densities(const BemSystem& system, const std::vector<IncidentWave>& incidents,
                                            const GmresOptions& opt) {
  if (system.op != BemOperator::kBurtonMiller) throw ConfigError("solve_density needs the Burton-Miller operator");
  const Eigen::Index n = system.matrix.rows();
  CMatX rhs(n, static_cast<Eigen::Index>(incidents.size()));
  for (std::size_t l = 0; l < incidents.size(); ++l) {
    if (std::abs(incidents[l].k() - system.k) > 1e-12 * system.k) {
      throw ConfigMismatch("incident wavenumber differs from the assembled system");
    }
    rhs.col(static_cast<Eigen::Index>(l)) = assemble_rhs(system.mesh, incidents[l]);
  }
  const std::vector<GmresResult> runs = gmres_columns(system.matrix, rhs, opt);
  std::vector<SurfaceDensity> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back({r.x, r.iterations, r.residual});
  return out;
}

CVecX far_field(const TriangleMesh& mesh, const CVecX& density, double k, const std::vector<Vec3>& directions) {
  if (density.size() != static_cast<Eigen::Index>(mesh.face_count())) {
    throw DimensionMismatch("far_field: density length differs from face count");
  }
  const SoaPoints pts = soa_points(mesh, dunavant4_rule());
  CVecX out(static_cast<Eigen::Index>(directions.size()));
#pragma omp parallel
  {
    std::vector<double> re(pts.x.size()), im(pts.x.size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(directions.size()); ++m) {
      const double xh[3] = {directions[m][0], directions[m][1], directions[m][2]};
      detail::plane_wave_row(xh, k, pts.block(), re.data(), im.data());
      Complex acc{0.0, 0.0};
      for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        double a = 0.0, b = 0.0;
        for (std::size_t q = f * pts.per_face; q < (f + 1) * pts.per_face; ++q) {
          a += re[q];
          b += im[q];
        }
        acc += Complex(a, b) * density[static_cast<Eigen::Index>(f)];
      }
      out[m] = -kInv4Pi * acc;
    }
  }
  return out;
}

CVecX scattered_field_at(const TriangleMesh& mesh, const CVecX& density, double k, const std::vector<Vec3>& points) {
  if (density.size() != static_cast<Eigen::Index>(mesh.face_count())) {
    throw DimensionMismatch("scattered_field_at: density length differs from face count");
  }
  const SoaPoints pts = soa_points(mesh, dunavant4_rule());
  const std::vector<double> rad = bounding_radii(mesh);
  const GaussLegendre gl = gauss_legendre(10);
  CVecX out(static_cast<Eigen::Index>(points.size()));
#pragma omp parallel
  {
    std::vector<WeightedPoint> inner;
    std::vector<double> re(pts.x.size()), im(pts.x.size());
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(points.size()); ++m) {
      const Vec3& x = points[m];
      const double xv[3] = {x[0], x[1], x[2]};
      detail::single_layer_row(xv, k, pts.block(), re.data(), im.data());
      Complex acc{0.0, 0.0};
      for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        Complex face{0.0, 0.0};
        if ((x - mesh.centroid(f)).norm() < 3.0 * rad[f]) {
          // Close to the surface: Duffy rule about the nearest point.
          const int fi = static_cast<int>(f);
          const Vec3& a = mesh.vertex(fi, 0);
          const Vec3& b = mesh.vertex(fi, 1);
          const Vec3& c = mesh.vertex(fi, 2);
          inner.clear();
          duffy_points(a, b, c, closest_point_on_triangle(x, a, b, c), gl, inner);
          for (const auto& y : inner) {
            const double r = (x - y.point).norm();
            face += y.weight * std::polar(kInv4Pi / r, k * r);
          }
        } else {
          double a = 0.0, b = 0.0;
          for (std::size_t q = f * pts.per_face; q < (f + 1) * pts.per_face; ++q) {
            a += re[q];
            b += im[q];
          }
          face = Complex(a, b);
        }
        acc += face * density[static_cast<Eigen::Index>(f)];
      }
      out[m] = -acc;
    }
  }
  return out;
}

void write_density_csv(const std::filesystem::path& path, const CVecX& density) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "face,re,im\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < density.size(); ++i) os << i << ',' << density[i].real() << ',' << density[i].imag() << '\n';
}

}  // namespace latscat
