#pragma once

#include <filesystem>
#include <vector>

#include "latscat/common.hpp"
#include "latscat/gmres.hpp"
#include "latscat/mesh.hpp"

namespace latscat {

/// Incident field sum_m c_m exp(i k x . e_m). A plane wave has a single term
/// with c = 1; an adjoint source is a superposition over directions -xhat_m.
class IncidentWave {
 public:
  static IncidentWave plane(double k, const Vec3& d);
  static IncidentWave superposition(double k, std::vector<Complex> coefficients, std::vector<Vec3> directions);

  double k() const { return k_; }
  const std::vector<Complex>& coefficients() const { return coeffs_; }
  const std::vector<Vec3>& directions() const { return dirs_; }
  bool is_plane_wave() const { return plane_; }

  Complex value(const Vec3& x) const;
  /// Value and normal derivative at x for unit normal n.
  void trace(const Vec3& x, const Vec3& n, Complex& u, Complex& dudn) const;

 private:
  IncidentWave(double k, std::vector<Complex> c, std::vector<Vec3> d, bool plane);
  double k_;
  std::vector<Complex> coeffs_;
  std::vector<Vec3> dirs_;
  bool plane_;
};

enum class BemOperator {
  kBurtonMiller,        // (1/2) I + K' - i k S
  kSingleLayer,         // S
  kAdjointDoubleLayer,  // K'
};

/// Quadrature tiers. A pair of faces with centroid distance d and bounding
/// radii r_i, r_j is "near" if d < near_factor (r_i + r_j), "intermediate" if
/// d < mid_factor (r_i + r_j), and "far" otherwise; intermediate and far pairs
/// use 6x6 and 3x3 point tensor rules. Faces sharing a vertex are always near.
/// Near pairs integrate the static kernel over the source face in closed form
/// plus a bounded remainder, and the outer face with a fan rule graded toward
/// the shared edge or vertex.
struct AssemblyOptions {
  double near_factor = 1.0;
  double mid_factor = 4.0;
  int radial_levels = 3;
  double radial_ratio = 0.15;
  int radial_order = 4;
  int angular_order = 5;
};

struct BemSystem {
  TriangleMesh mesh;
  double k = 0.0;
  BemOperator op = BemOperator::kBurtonMiller;
  AssemblyOptions options;
  CMatX matrix;
};

BemSystem assemble(const TriangleMesh& mesh, double k, const AssemblyOptions& options = {},
                   BemOperator op = BemOperator::kBurtonMiller);

/// Galerkin right-hand side b_i = int_{T_i} (du^i/dnu - i k u^i).
CVecX assemble_rhs(const TriangleMesh& mesh, const IncidentWave& incident);

/// Piecewise-constant approximation of v = du/dnu on the boundary.
struct SurfaceDensity {
  CVecX values;
  int iterations = 0;
  double residual = 0.0;
};

SurfaceDensity solve_density(const BemSystem& system, const IncidentWave& incident, const GmresOptions& opt = {});

/// Solves for several incident fields sharing one matrix. The GMRES runs
/// advance in lockstep so each step streams the matrix once for all of them.
std::vector<SurfaceDensity> solve_densities(const BemSystem& system, const std::vector<IncidentWave>& incidents,
                                            const GmresOptions& opt = {});

/// u_inf(xhat) = -(1/4 pi) int exp(-i k xhat . y) v(y) ds(y).
CVecX far_field(const TriangleMesh& mesh, const CVecX& density, double k, const std::vector<Vec3>& directions);

/// Single-layer evaluation u^s(x) = -int Phi(x, y) v(y) ds(y) at exterior points.
/// Points close to the surface use a singularity-adapted rule.
CVecX scattered_field_at(const TriangleMesh& mesh, const CVecX& density, double k, const std::vector<Vec3>& points);

/// CSV with header "face,re,im".
void write_density_csv(const std::filesystem::path& path, const CVecX& density);

}  // namespace latscat
