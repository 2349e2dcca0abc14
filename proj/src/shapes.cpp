#include "latscat/shapes.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "latscat/errors.hpp"

namespace latscat {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

// Closest-point computation after D. Eberly, "Distance from a point to an
// ellipse, an ellipsoid, or a hyperellipsoid": axes sorted e0 >= e1 (>= e2),
// query in the first octant, root of the secular equation by bisection.

double robust_length(double a, double b) {
  const double m = std::max(std::abs(a), std::abs(b));
  if (m == 0.0) return 0.0;
  return m * std::hypot(a / m, b / m);
}

double robust_length(double a, double b, double c) {
  const double m = std::max({std::abs(a), std::abs(b), std::abs(c)});
  if (m == 0.0) return 0.0;
  const double x = a / m, y = b / m, z = c / m;
  return m * std::sqrt(x * x + y * y + z * z);
}

double root2(double r0, double z0, double z1, double g) {
  const double n0 = r0 * z0;
  double s0 = z1 - 1.0;
  double s1 = g < 0.0 ? 0.0 : robust_length(n0, z1) - 1.0;
  double s = 0.0;
  for (int i = 0; i < 1100; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double a = n0 / (s + r0), b = z1 / (s + 1.0);
    const double gs = a * a + b * b - 1.0;
    if (gs > 0.0) {
      s0 = s;
    } else if (gs < 0.0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

double root3(double r0, double r1, double z0, double z1, double z2, double g) {
  const double n0 = r0 * z0, n1 = r1 * z1;
  double s0 = z2 - 1.0;
  double s1 = g < 0.0 ? 0.0 : robust_length(n0, n1, z2) - 1.0;
  double s = 0.0;
  for (int i = 0; i < 1100; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double a = n0 / (s + r0), b = n1 / (s + r1), c = z2 / (s + 1.0);
    const double gs = a * a + b * b + c * c - 1.0;
    if (gs > 0.0) {
      s0 = s;
    } else if (gs < 0.0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

void closest_ellipse(double e0, double e1, double y0, double y1, double& x0, double& x1) {
  if (y1 > 0.0) {
    if (y0 > 0.0) {
      const double z0 = y0 / e0, z1 = y1 / e1;
      const double g = z0 * z0 + z1 * z1 - 1.0;
      if (g != 0.0) {
        const double r0 = (e0 / e1) * (e0 / e1);
        const double s = root2(r0, z0, z1, g);
        x0 = r0 * y0 / (s + r0);
        x1 = y1 / (s + 1.0);
      } else {
        x0 = y0;
        x1 = y1;
      }
    } else {
      x0 = 0.0;
      x1 = e1;
    }
    return;
  }
  const double numer0 = e0 * y0, denom0 = e0 * e0 - e1 * e1;
  if (numer0 < denom0) {
    const double xde0 = numer0 / denom0;
    x0 = e0 * xde0;
    x1 = e1 * std::sqrt(std::max(0.0, 1.0 - xde0 * xde0));
  } else {
    x0 = e0;
    x1 = 0.0;
  }
}

void closest_ellipsoid(const std::array<double, 3>& e, const std::array<double, 3>& y, std::array<double, 3>& x) {
  if (y[2] > 0.0) {
    if (y[1] > 0.0) {
      if (y[0] > 0.0) {
        const double z0 = y[0] / e[0], z1 = y[1] / e[1], z2 = y[2] / e[2];
        const double g = z0 * z0 + z1 * z1 + z2 * z2 - 1.0;
        if (g != 0.0) {
          const double r0 = (e[0] / e[2]) * (e[0] / e[2]);
          const double r1 = (e[1] / e[2]) * (e[1] / e[2]);
          const double s = root3(r0, r1, z0, z1, z2, g);
          x[0] = r0 * y[0] / (s + r0);
          x[1] = r1 * y[1] / (s + r1);
          x[2] = y[2] / (s + 1.0);
        } else {
          x = y;
        }
      } else {
        x[0] = 0.0;
        closest_ellipse(e[1], e[2], y[1], y[2], x[1], x[2]);
      }
    } else if (y[0] > 0.0) {
      x[1] = 0.0;
      closest_ellipse(e[0], e[2], y[0], y[2], x[0], x[2]);
    } else {
      x = {0.0, 0.0, e[2]};
    }
    return;
  }
  const double denom0 = e[0] * e[0] - e[2] * e[2], denom1 = e[1] * e[1] - e[2] * e[2];
  const double numer0 = e[0] * y[0], numer1 = e[1] * y[1];
  if (numer0 < denom0 && numer1 < denom1) {
    const double xde0 = numer0 / denom0, xde1 = numer1 / denom1;
    const double discr = 1.0 - xde0 * xde0 - xde1 * xde1;
    if (discr > 0.0) {
      x = {e[0] * xde0, e[1] * xde1, e[2] * std::sqrt(discr)};
      return;
    }
  }
  x[2] = 0.0;
  closest_ellipse(e[0], e[1], y[0], y[1], x[0], x[1]);
}

}  // namespace

Ellipsoid Ellipsoid::sphere(double radius, const Vec3& center) { return {center, Vec3::Constant(radius)}; }

Vec3 Ellipsoid::closest_point(const Vec3& x) const {
  if (!(axes.minCoeff() > 0.0)) throw ConfigError("ellipsoid: semi-axes must be positive");
  const Vec3 rel = x - center;
  if (axes[0] == axes[1] && axes[1] == axes[2]) {
    const double r = rel.norm();
    if (r == 0.0) return center + Vec3(0.0, 0.0, axes[2]);
    return center + rel * (axes[0] / r);
  }
  // Sort axes in decreasing order and fold the query into the first octant.
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return axes[a] > axes[b]; });
  std::array<double, 3> e, y, c;
  for (int i = 0; i < 3; ++i) {
    e[i] = axes[order[i]];
    y[i] = std::abs(rel[order[i]]);
  }
  closest_ellipsoid(e, y, c);
  Vec3 out;
  for (int i = 0; i < 3; ++i) out[order[i]] = std::copysign(c[i], rel[order[i]]);
  return center + out;
}

bool Ellipsoid::contains(const Vec3& x) const { return (x - center).cwiseQuotient(axes).squaredNorm() < 1.0; }

double Ellipsoid::sdf(const Vec3& x) const {
  const double d = (closest_point(x) - x).norm();
  return contains(x) ? -d : d;
}

double Ellipsoid::volume() const { return 4.0 / 3.0 * kPi * axes.prod(); }

SdfSampleSet sample_sdf(const Ellipsoid& shape, const SampleOptions& opt) {
  if (opt.count == 0) throw ConfigError("sample_sdf: count must be positive");
  if (!(opt.surface_fraction >= 0.0 && opt.surface_fraction <= 1.0)) {
    throw ConfigError("sample_sdf: surface_fraction must lie in [0, 1]");
  }
  if (!(opt.noise >= 0.0)) throw ConfigError("sample_sdf: noise must be non-negative");
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> cube(-1.0, 1.0);
  const auto near = static_cast<std::size_t>(std::llround(opt.surface_fraction * static_cast<double>(opt.count)));
  SdfSampleSet s;
  s.points.reserve(opt.count);
  for (std::size_t i = 0; i < opt.count; ++i) {
    Vec3 p;
    if (i < near) {
      Vec3 u(gauss(rng), gauss(rng), gauss(rng));
      u.normalize();
      p = shape.center + shape.axes.cwiseProduct(u);
      if (opt.noise > 0.0) p += opt.noise * Vec3(gauss(rng), gauss(rng), gauss(rng));
    } else {
      p = Vec3(cube(rng), cube(rng), cube(rng));
    }
    s.points.push_back(p);
  }
  s.sdf.resize(s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) s.sdf[i] = shape.sdf(s.points[i]);
  return s;
}

void write_samples(const std::filesystem::path& path, const SdfSampleSet& s) {
  if (s.points.size() != s.sdf.size()) throw DimensionMismatch("sample set: point and value counts differ");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  const std::uint64_t n = s.points.size();
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const double rec[4] = {s.points[i][0], s.points[i][1], s.points[i][2], s.sdf[i]};
    os.write(reinterpret_cast<const char*>(rec), sizeof rec);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

SdfSampleSet read_samples(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  const auto bytes = std::filesystem::file_size(path);
  if (!is || bytes != sizeof n + n * 4 * sizeof(double)) throw IoError("malformed sample file " + path.string());
  SdfSampleSet s;
  s.points.resize(n);
  s.sdf.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    double rec[4];
    is.read(reinterpret_cast<char*>(rec), sizeof rec);
    s.points[i] = Vec3(rec[0], rec[1], rec[2]);
    s.sdf[i] = rec[3];
    if (!std::isfinite(rec[0]) || !std::isfinite(rec[1]) || !std::isfinite(rec[2]) || !std::isfinite(rec[3])) {
      throw IoError("non-finite sample in " + path.string());
    }
  }
  return s;
}

std::vector<SdfSampleSet> read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".bin") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SdfSampleSet> out;
  for (const auto& f : files) out.push_back(read_samples(f));
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<SdfSampleSet>& sets) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "shape_%03zu.bin", i);
    write_samples(dir / name, sets[i]);
  }
}

}  // namespace latscat
