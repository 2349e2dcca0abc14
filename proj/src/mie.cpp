#include "latscat/mie.hpp"

#include <algorithm>
#include <cmath>

#include "latscat/errors.hpp"

namespace latscat {

SphericalBessel spherical_bessel(int nmax, double x) {
  if (!(x > 0.0) || nmax < 0) throw DimensionMismatch("spherical_bessel needs x > 0 and nmax >= 0");
  SphericalBessel out;
  const int n1 = nmax + 1;
  out.j.assign(n1 + 1, 0.0);
  out.y.assign(n1 + 1, 0.0);

  // Miller: start well above both nmax and x so j is the minimal solution there.
  const double top = std::max<double>(nmax, x);
  const int start = static_cast<int>(std::ceil(top)) + 30 + static_cast<int>(std::ceil(std::sqrt(40.0 * top)));
  std::vector<double> f(start + 2, 0.0);
  f[start + 1] = 0.0;
  f[start] = 1.0;
  for (int n = start; n >= 1; --n) {
    f[n - 1] = (2.0 * n + 1.0) / x * f[n] - f[n + 1];
    if (std::abs(f[n - 1]) > 1e100) {
      for (int m = n - 1; m <= start; ++m) f[m] *= 1e-100;
    }
  }
  double norm = 0.0;
  for (int n = start; n >= 0; --n) norm += (2.0 * n + 1.0) * f[n] * f[n];
  const double scale = 1.0 / std::sqrt(norm);
  // The sum identity fixes only the magnitude; take the sign from whichever
  // of j_0, j_1 is further from a zero.
  const double j0 = x < 1e-4 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  const double j1 = x < 1e-4 ? x / 3.0 : std::sin(x) / (x * x) - std::cos(x) / x;
  const bool use0 = std::abs(j0) >= std::abs(j1);
  const double ref = use0 ? j0 : j1;
  const double got = use0 ? f[0] : f[1];
  const double sign = (got >= 0.0) == (ref >= 0.0) ? 1.0 : -1.0;
  for (int n = 0; n <= n1; ++n) out.j[n] = sign * scale * f[n];

  out.y[0] = -std::cos(x) / x;
  out.y[1] = -std::cos(x) / (x * x) - std::sin(x) / x;
  for (int n = 1; n < n1; ++n) out.y[n + 1] = (2.0 * n + 1.0) / x * out.y[n] - out.y[n - 1];

  out.dj.assign(n1, 0.0);
  out.dy.assign(n1, 0.0);
  out.dj[0] = -out.j[1];
  out.dy[0] = -out.y[1];
  for (int n = 1; n < n1; ++n) {
    out.dj[n] = out.j[n - 1] - (n + 1.0) / x * out.j[n];
    out.dy[n] = out.y[n - 1] - (n + 1.0) / x * out.y[n];
  }
  out.j.resize(n1);
  out.y.resize(n1);
  return out;
}

std::vector<double> legendre(int nmax, double t) {
  std::vector<double> p(nmax + 1);
  p[0] = 1.0;
  if (nmax >= 1) p[1] = t;
  for (int n = 1; n < nmax; ++n) p[n + 1] = ((2.0 * n + 1.0) * t * p[n] - n * p[n - 1]) / (n + 1.0);
  return p;
}

namespace {

void check_inputs(const SphereScatterer& s, double k) {
  if (!(s.radius > 0.0)) throw ConfigError("sphere radius must be positive");
  if (!(k > 0.0)) throw ConfigError("wavenumber must be positive");
}

// Sums terms t(n) until n passes the minimum count and |t(n)| < tol.
template <class Term>
Complex sum_series(int min_terms, const MieOptions& opt, Term&& term, int available) {
  Complex acc{0.0, 0.0};
  for (int n = 0; n < available; ++n) {
    const Complex t = term(n);
    acc += t;
    if (n >= min_terms && std::abs(t) < opt.term_tol) return acc;
  }
  throw SeriesNotConverged("partial-wave series did not reach tolerance within " + std::to_string(available) +
                           " terms");
}

}  // namespace

Complex mie_far_field(const SphereScatterer& s, double k, const Vec3& d, const Vec3& xhat, const MieOptions& opt) {
  check_inputs(s, k);
  const double ka = k * s.radius;
  const int min_terms = static_cast<int>(std::ceil(ka)) + opt.extra_terms;
  const int nmax = std::max(min_terms + 1, std::min(opt.max_terms, min_terms + 200));
  const auto b = spherical_bessel(nmax, ka);
  const auto p = legendre(nmax, std::clamp(d.dot(xhat), -1.0, 1.0));
  auto term = [&](int n) {
    const Complex h(b.j[n], b.y[n]);
    return (2.0 * n + 1.0) * (b.j[n] / h) * p[n];
  };
  const Complex base = kI / k * sum_series(min_terms, opt, term, nmax + 1);
  return base * std::exp(kI * k * (d - xhat).dot(s.center));
}

Complex mie_scattered_field(const SphereScatterer& s, double k, const Vec3& d, const Vec3& x, const MieOptions& opt) {
  check_inputs(s, k);
  const Vec3 rel = x - s.center;
  const double r = rel.norm();
  if (!(r > s.radius)) throw PointInside("evaluation point is not outside the sphere");
  const double ka = k * s.radius;
  const int min_terms = static_cast<int>(std::ceil(ka)) + opt.extra_terms;
  const int nmax = std::max(min_terms + 1, std::min(opt.max_terms, min_terms + 200));
  const auto ba = spherical_bessel(nmax, ka);
  const auto br = spherical_bessel(nmax, k * r);
  const auto p = legendre(nmax, std::clamp(d.dot(rel) / r, -1.0, 1.0));
  Complex in{1.0, 0.0};  // i^n
  auto term = [&](int n) {
    if (n > 0) in *= kI;
    const Complex ha(ba.j[n], ba.y[n]);
    const Complex hr(br.j[n], br.y[n]);
    // Ratio first: h_n(kr) and 1/h_n(ka) are individually huge/tiny for large n.
    return -in * (2.0 * n + 1.0) * ba.j[n] * (hr / ha) * p[n];
  };
  return std::exp(kI * k * s.center.dot(d)) * sum_series(min_terms, opt, term, nmax + 1);
}

}  // namespace latscat
