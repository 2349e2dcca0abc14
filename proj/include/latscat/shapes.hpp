#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "latscat/common.hpp"

namespace latscat {

/// Axis-aligned ellipsoid with an exact signed distance (negative inside).
/// Equal axes give a sphere.
struct Ellipsoid {
  Vec3 center = Vec3::Zero();
  Vec3 axes{0.5, 0.5, 0.5};

  static Ellipsoid sphere(double radius, const Vec3& center = Vec3::Zero());
  /// Exact Euclidean distance to the surface, signed.
  double sdf(const Vec3& x) const;
  /// Closest surface point to x.
  Vec3 closest_point(const Vec3& x) const;
  bool contains(const Vec3& x) const;
  double volume() const;
};

struct SdfSampleSet {
  std::vector<Vec3> points;
  std::vector<double> sdf;
  std::size_t size() const { return points.size(); }
};

struct SampleOptions {
  std::size_t count = 4000;
  double surface_fraction = 0.5;  // remainder is uniform in the cube (-1,1)^3
  double noise = 0.02;            // std. dev. of the Gaussian offset of surface points
  std::uint64_t seed = 1;
};

/// Points near the surface (surface points displaced by isotropic Gaussian
/// noise) and uniform in the cube, each labelled with the exact SDF.
SdfSampleSet sample_sdf(const Ellipsoid& shape, const SampleOptions& opt);

/// Binary sample file: uint64 count, then count records of four float64
/// (x, y, z, sdf), little-endian.
void write_samples(const std::filesystem::path& path, const SdfSampleSet& s);
SdfSampleSet read_samples(const std::filesystem::path& path);

/// Every "*.bin" file of a directory, in lexicographic order.
std::vector<SdfSampleSet> read_dataset(const std::filesystem::path& dir);
/// Writes shape_000.bin, shape_001.bin, ... into `dir` (created if missing).
void write_dataset(const std::filesystem::path& dir, const std::vector<SdfSampleSet>& sets);

}  // namespace latscat
