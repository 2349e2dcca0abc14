#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "latscat/bem.hpp"
#include "latscat/common.hpp"
#include "latscat/decoder.hpp"
#include "latscat/measurement.hpp"

namespace latscat {

/// (1/2LM) sum |u_sim - u_obs|^2 for complex data. For phaseless data this
/// defers to phaseless_loss with the observation's eps. Throws ConfigMismatch
/// when the two data sets describe different measurements.
double loss(const FarFieldData& sim, const FarFieldData& obs);

/// (1/2LM) sum (T(u_sim) - T(u_obs))^2 with T(u) = |u|^2 / sqrt(|u|^2 + eps).
/// Only moduli enter, so either argument may hold complex values or moduli.
double phaseless_loss(const CMatX& sim, const CMatX& obs, double eps);

/// Per-entry weights a_lm such that the loss variation equals
/// (1/LM) Re sum a_lm du_lm. For complex data a = conj(u_sim - u_obs);
/// phaseless data give a = rho conj(u) (|u|^2 + 2 eps) / (|u|^2 + eps)^(3/2)
/// with rho = T(u_sim) - T(u_obs). `sim` must be the complex simulated field.
CMatX residual_weights(const CMatX& sim, const FarFieldData& obs);

/// Adjoint incident field for incident index l: the superposition
/// sum_m a_lm / (4 pi M) exp(-i k xhat_m . x). Throws ModeMismatch for
/// backscatter data, whose adjoint field is a multiple of the forward one.
IncidentWave adjoint_source(const MeasurementConfig& config, const CMatX& weights, std::size_t l);

/// Complex far-field matrix (L x M) of the given densities, one per incident wave.
CMatX far_field_matrix(const TriangleMesh& mesh, const std::vector<SurfaceDensity>& densities,
                       const MeasurementConfig& config);

/// Discretised boundary integral
///   (1/L) Re sum_l int v_l w_l  grad_z f / |grad_x f| ds
/// with one centroid value per face; v_l are forward and w_l adjoint
/// densities on `mesh`. Throws IrregularSurface when |grad_x f| < g_min at
/// a centroid.
VecX latent_gradient(const Decoder& decoder, const VecX& z, const TriangleMesh& mesh,
                     const std::vector<SurfaceDensity>& forward, const std::vector<SurfaceDensity>& adjoint,
                     double g_min = 1e-6);

/// Backscatter form: the adjoint density is a_l / (4 pi) v_l, so
///   (1/4 pi L) Re sum_l a_l int v_l^2 grad_z f / |grad_x f| ds
/// without adjoint solves. `weights` is the L x 1 output of residual_weights.
/// Throws ModeMismatch unless `config` is in backscatter mode.
VecX backscatter_gradient(const Decoder& decoder, const VecX& z, const TriangleMesh& mesh,
                          const std::vector<SurfaceDensity>& forward, const MeasurementConfig& config,
                          const CMatX& weights, double g_min = 1e-6);

struct ObjectiveOptions {
  GridSpec grid;
  AssemblyOptions assembly;
  GmresOptions gmres;
  double g_min = 1e-6;
};

struct Evaluation {
  TriangleMesh mesh;
  CMatX far_field;  // complex, L x M
  double loss = 0.0;
  VecX gradient;    // empty unless requested
  int solver_iterations = 0;
};

/// Loss and latent gradient for a fixed decoder and observed data: surface
/// extraction, one assembly, forward solves, adjoint solves unless the data
/// are backscatter, and the gradient integral.
class LatentObjective {
 public:
  LatentObjective(const Decoder& decoder, FarFieldData observed, ObjectiveOptions options);

  const Decoder& decoder() const { return decoder_; }
  const FarFieldData& observed() const { return observed_; }
  const ObjectiveOptions& options() const { return options_; }

  Evaluation evaluate(const VecX& z, bool with_gradient = true) const;
  double loss_only(const VecX& z) const { return evaluate(z, false).loss; }

 private:
  const Decoder& decoder_;
  FarFieldData observed_;
  ObjectiveOptions options_;
};

/// Keeps round(p Z) coordinates (at least one) chosen uniformly without
/// replacement and rescales them by Z / kept, so the expectation over masks
/// is the input. Throws ConfigError unless 0 < p <= 1.
VecX mask_gradient(const VecX& g, double p, std::mt19937_64& rng);

/// Central differences (f(z + s e_i) - f(z - s e_i)) / 2s.
VecX central_differences(const std::function<double(const VecX&)>& f, const VecX& z, double step);

}  // namespace latscat
