#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "latscat/bem.hpp"
#include "latscat/common.hpp"
#include "latscat/decoder.hpp"
#include "latscat/grid.hpp"
#include "latscat/mesh.hpp"

namespace latscat {

/// N quasi-uniform unit vectors: x3 = (2n-1)/N - 1, polar angle 2 pi n phi
/// with phi = (1 + sqrt 5)/2, n = 1..N. Throws NonPositiveN for N < 1.
std::vector<Vec3> fibonacci_directions(int n);

enum class DataMode { kFull, kBackscatter, kPhaseless };

std::string to_string(DataMode mode);
/// "full", "backscatter" or "phaseless"; throws UnknownKind otherwise.
DataMode parse_mode(const std::string& name);

/// Wavenumber, incident directions d_l and observation directions. In
/// backscatter mode each incident wave has the single observation -d_l.
struct MeasurementConfig {
  double k = kPi;
  std::vector<Vec3> incident;
  std::vector<Vec3> observation;  // unused in backscatter mode
  DataMode mode = DataMode::kFull;
  /// Smoothing in |u|^2 / sqrt(|u|^2 + eps). Zero selects the default,
  /// 1e-8 times the mean squared modulus of the simulated data.
  double phaseless_eps = 0.0;

  /// L incident and M observation directions from the Fibonacci lattice.
  static MeasurementConfig fibonacci(double k, int l, int m, DataMode mode = DataMode::kFull);

  std::size_t rows() const { return incident.size(); }
  std::size_t cols() const { return mode == DataMode::kBackscatter ? 1 : observation.size(); }
  const Vec3 observation_direction(std::size_t l, std::size_t m) const {
    return mode == DataMode::kBackscatter ? Vec3(-incident[l]) : observation[m];
  }
  /// Throws ConfigError unless k > 0, L, M >= 1 and directions are unit to 1e-12.
  void validate() const;
  /// True when both configurations describe the same measurements (directions
  /// compared to 1e-12).
  bool same_measurements(const MeasurementConfig& other) const;
};

/// Measured or simulated data: complex far field u_inf(xhat_m, d_l) as an
/// L x M array. Phaseless data hold the modulus |u_inf| (imaginary parts zero).
struct FarFieldData {
  MeasurementConfig config;
  CMatX values;
  double delta = 0.0;
  std::uint64_t noise_seed = 0;
};

struct SimulationOptions {
  GridSpec grid;                 // meshing grid for implicit targets
  bool refine_grid = true;       // mesh implicit targets at h/2
  AssemblyOptions assembly;
  GmresOptions gmres;
};

/// One solve per incident direction on the target mesh, far field at every
/// observation direction. Phaseless data store |u_inf| and, if unset, fix
/// the smoothing eps from the data.
FarFieldData simulate_data(const TriangleMesh& target, const MeasurementConfig& config,
                           const SimulationOptions& opt = {});
/// Same for an implicit target f(x) <= 0, meshed by marching cubes.
FarFieldData simulate_data(const std::function<double(const Vec3&)>& target, const MeasurementConfig& config,
                           const SimulationOptions& opt = {});
FarFieldData simulate_data(const Decoder& decoder, const VecX& z, const MeasurementConfig& config,
                           const SimulationOptions& opt = {});

/// Multiplicative noise u (1 + delta xi), xi standard normal per entry
/// (real). Phaseless data become |1 + delta xi| |u|. Throws NegativeDelta.
FarFieldData add_noise(const FarFieldData& data, double delta, std::uint64_t seed);

/// Text format: a "# latscat-farfield" header line carrying L, M, k, mode,
/// delta, seed and eps as key=value pairs, a column header, then one CSV row
/// per entry: l,m,dx,dy,dz,xx,xy,xz,re,im (phaseless: ...,modulus).
void write_far_field(const std::filesystem::path& path, const FarFieldData& data);
FarFieldData read_far_field(const std::filesystem::path& path);

/// Number of grid nodes classified differently by the two inside tests.
std::size_t indicator_error(const std::function<bool(const Vec3&)>& a, const std::function<bool(const Vec3&)>& b,
                            const GridSpec& grid);
std::size_t indicator_error(const Decoder& decoder, const VecX& za, const VecX& zb, const GridSpec& grid);
std::size_t indicator_error(const TriangleMesh& a, const TriangleMesh& b, const GridSpec& grid);

}  // namespace latscat
