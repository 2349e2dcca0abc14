#pragma once

#include <vector>

#include "latscat/common.hpp"

namespace latscat {

/// Spherical Bessel functions j_n, y_n and their derivatives for n = 0..nmax.
struct SphericalBessel {
  std::vector<double> j, y, dj, dy;
};

/// j_n by normalized downward recurrence, y_n by upward recurrence. x > 0.
SphericalBessel spherical_bessel(int nmax, double x);

/// Legendre polynomials P_0..P_nmax at t.
std::vector<double> legendre(int nmax, double t);

struct SphereScatterer {
  double radius = 0.5;
  Vec3 center = Vec3::Zero();
};

struct MieOptions {
  int extra_terms = 10;      // terms beyond ka before the tolerance test starts
  double term_tol = 1e-14;   // stop once a term falls below this magnitude
  int max_terms = 2000;
};

/// Far-field pattern of a sound-soft sphere for plane-wave direction d,
/// normalized so that u^s(r xhat) ~ e^{ikr}/r * u_inf(xhat).
Complex mie_far_field(const SphereScatterer& s, double k, const Vec3& d, const Vec3& xhat,
                      const MieOptions& opt = {});

/// Scattered field at an exterior point x. Throws PointInside when |x - c| <= a.
Complex mie_scattered_field(const SphereScatterer& s, double k, const Vec3& d, const Vec3& x,
                            const MieOptions& opt = {});

}  // namespace latscat
