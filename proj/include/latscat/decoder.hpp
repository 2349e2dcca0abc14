#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "latscat/common.hpp"
#include "latscat/grid.hpp"
#include "latscat/mesh.hpp"

namespace latscat {

/// Implicit surface representation f(z, x): negative inside, zero on the
/// surface. Implementations are immutable and safe for concurrent calls.
class Decoder {
 public:
  virtual ~Decoder() = default;
  virtual int latent_dim() const = 0;
  virtual std::string kind() const = 0;

  // All entry points throw DimensionMismatch when z.size() != latent_dim().
  double evaluate(const VecX& z, const Vec3& x) const;
  Vec3 grad_x(const VecX& z, const Vec3& x) const;
  VecX grad_z(const VecX& z, const Vec3& x) const;
  double evaluate_with_gradients(const VecX& z, const Vec3& x, Vec3& gx, VecX& gz) const;
  std::vector<double> evaluate_many(const VecX& z, const std::vector<Vec3>& xs) const;

 protected:
  virtual double value(const VecX& z, const Vec3& x) const = 0;
  virtual double value_and_gradients(const VecX& z, const Vec3& x, Vec3& gx, VecX& gz) const = 0;
  virtual void values(const VecX& z, const std::vector<Vec3>& xs, double* out) const;

 private:
  void check(const VecX& z) const;
};

/// Seven-parameter superquadric family z = (c, s, t):
///   centre c, semi-axes a_i = a_min + (a_max - a_min) sigmoid(s_i),
///   exponent e = 1 + exp(r t)   (t = 0 gives an ellipsoid, r = exponent_rate),
///   f = g ((sum |(x_i - c_i) / a_i|^e)^(1/e) - 1),  g = (a_1 a_2 a_3)^(1/3).
/// The scaled implicit is the exact signed distance for spheres and only an
/// approximation otherwise; its zero set is always the exact superquadric.
/// The rate r < 1 makes the exponent a slow coordinate: an optimizer that moves
/// every coordinate by a similar amount grows or shrinks the axes first instead
/// of trading size for squareness.
class AnalyticFamily final : public Decoder {
 public:
  static constexpr int kLatentDim = 7;

  struct Params {
    Vec3 center;
    Vec3 axes;
    double exponent;
  };

  explicit AnalyticFamily(double a_min = 0.15, double a_max = 0.8, double exponent_rate = 0.25);

  int latent_dim() const override { return kLatentDim; }
  std::string kind() const override { return "analytic"; }
  double a_min() const { return a_min_; }
  double a_max() const { return a_max_; }
  double exponent_rate() const { return rate_; }

  Params params(const VecX& z) const;
  /// Inverse of params(); throws ConfigError for axes outside (a_min, a_max)
  /// or exponent <= 1.
  VecX encode(const Vec3& center, const Vec3& axes, double exponent = 2.0) const;
  VecX sphere(double radius, const Vec3& center = Vec3::Zero()) const;

 protected:
  double value(const VecX& z, const Vec3& x) const override;
  double value_and_gradients(const VecX& z, const Vec3& x, Vec3& gx, VecX& gz) const override;

 private:
  double a_min_, a_max_, rate_;
};

enum class Activation : std::uint32_t { kSoftplus = 1, kTanh = 2 };

/// Fully connected network (Z + 3) -> hidden... -> 1. Layer l maps
/// h -> act(w[l] h + b[l]); the final layer is affine. Softplus is
/// log(1 + exp(beta a)) / beta.
struct DecoderWeights {
  int latent_dim = 0;
  Activation activation = Activation::kSoftplus;
  double beta = 10.0;
  std::vector<Eigen::MatrixXd> w;
  std::vector<VecX> b;

  /// Throws ConfigError on an inconsistent layer chain or non-finite values.
  void validate() const;
  std::size_t parameter_count() const;
};

/// PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
DecoderWeights random_weights(int latent_dim, const std::vector<int>& hidden, Activation act, double beta,
                              std::uint64_t seed);

/// Binary weights file: magic "LSDW", uint32 version (1), latent dim, layer
/// count, activation id, float64 beta, per-layer (rows, cols) uint32 pairs;
/// then for each layer the weight matrix row-major followed by its bias,
/// all float64 little-endian.
void write_weights(const std::filesystem::path& path, const DecoderWeights& w);
DecoderWeights read_weights(const std::filesystem::path& path);

/// Latent codes as CSV, one code per row.
void write_codes(const std::filesystem::path& path, const std::vector<VecX>& codes);
std::vector<VecX> read_codes(const std::filesystem::path& path);

class MlpDecoder final : public Decoder {
 public:
  explicit MlpDecoder(DecoderWeights weights);
  int latent_dim() const override { return weights_.latent_dim; }
  std::string kind() const override { return "mlp"; }
  const DecoderWeights& weights() const { return weights_; }

 protected:
  double value(const VecX& z, const Vec3& x) const override;
  double value_and_gradients(const VecX& z, const Vec3& x, Vec3& gx, VecX& gz) const override;
  void values(const VecX& z, const std::vector<Vec3>& xs, double* out) const override;

 private:
  DecoderWeights weights_;
};

/// Marching cubes on the decoder's zero level set, followed by a regularity
/// check: throws IrregularSurface when |grad_x f| < g_min at any vertex.
TriangleMesh extract_surface(const Decoder& decoder, const VecX& z, const GridSpec& grid, double g_min = 1e-6);

}  // namespace latscat
