#include "latscat/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latscat/errors.hpp"

namespace latscat {

namespace {

void check_shapes(const CMatX& a, const CMatX& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch("far-field arrays differ in shape");
  }
}

double smoothed(double s, double eps) { return s / std::sqrt(s + eps); }

}  // namespace

double phaseless_loss(const CMatX& sim, const CMatX& obs, double eps) {
  if (!(eps > 0.0)) throw NonPositiveEpsilon("phaseless loss needs eps > 0");
  check_shapes(sim, obs);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sim.size(); ++i) {
    const double rho = smoothed(std::norm(sim(i)), eps) - smoothed(std::norm(obs(i)), eps);
    acc += rho * rho;
  }
  return acc / (2.0 * static_cast<double>(sim.size()));
}

double loss(const FarFieldData& sim, const FarFieldData& obs) {
  if (!sim.config.same_measurements(obs.config)) throw ConfigMismatch("simulated and observed data differ in setup");
  check_shapes(sim.values, obs.values);
  if (obs.config.mode == DataMode::kPhaseless) {
    return phaseless_loss(sim.values, obs.values, obs.config.phaseless_eps);
  }
  return (sim.values - obs.values).squaredNorm() / (2.0 * static_cast<double>(sim.values.size()));
}

CMatX residual_weights(const CMatX& sim, const FarFieldData& obs) {
  check_shapes(sim, obs.values);
  if (obs.config.mode != DataMode::kPhaseless) return (sim - obs.values).conjugate();
  const double eps = obs.config.phaseless_eps;
  if (!(eps > 0.0)) throw NonPositiveEpsilon("phaseless data need eps > 0");
  CMatX a(sim.rows(), sim.cols());
  for (Eigen::Index i = 0; i < sim.size(); ++i) {
    const double s = std::norm(sim(i));
    const double rho = smoothed(s, eps) - smoothed(std::norm(obs.values(i)), eps);
    a(i) = rho * std::conj(sim(i)) * (s + 2.0 * eps) / std::pow(s + eps, 1.5);
  }
  return a;
}

IncidentWave adjoint_source(const MeasurementConfig& config, const CMatX& weights, std::size_t l) {
  if (config.mode == DataMode::kBackscatter) {
    throw ModeMismatch("backscatter data have no separate adjoint source");
  }
  const auto m_count = config.cols();
  if (static_cast<std::size_t>(weights.rows()) != config.rows() || static_cast<std::size_t>(weights.cols()) != m_count) {
    throw DimensionMismatch("residual weights do not match the measurement layout");
  }
  if (l >= config.rows()) throw DimensionMismatch("incident index out of range");
  std::vector<Complex> c(m_count);
  std::vector<Vec3> dirs(m_count);
  const double scale = 1.0 / (4.0 * kPi * static_cast<double>(m_count));
  for (std::size_t m = 0; m < m_count; ++m) {
    c[m] = scale * weights(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m));
    dirs[m] = -config.observation[m];
  }
  return IncidentWave::superposition(config.k, std::move(c), std::move(dirs));
}

CMatX far_field_matrix(const TriangleMesh& mesh, const std::vector<SurfaceDensity>& densities,
                       const MeasurementConfig& config) {
  if (densities.size() != config.rows()) throw DimensionMismatch("one density per incident wave expected");
  CMatX out(static_cast<Eigen::Index>(config.rows()), static_cast<Eigen::Index>(config.cols()));
  for (std::size_t l = 0; l < config.rows(); ++l) {
    std::vector<Vec3> obs;
    for (std::size_t m = 0; m < config.cols(); ++m) obs.push_back(config.observation_direction(l, m));
    out.row(static_cast<Eigen::Index>(l)) = far_field(mesh, densities[l].values, config.k, obs).transpose();
  }
  return out;
}

namespace {

// sum_f s_f area_f grad_z f(c_f) / |grad_x f(c_f)|
VecX integrate_sensitivity(const Decoder& decoder, const VecX& z, const TriangleMesh& mesh, const VecX& s,
                           double g_min) {
  VecX grad = VecX::Zero(decoder.latent_dim());
  VecX gz(decoder.latent_dim());
  Vec3 gx;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    decoder.evaluate_with_gradients(z, mesh.centroid(f), gx, gz);
    const double gn = gx.norm();
    if (!(gn >= g_min)) throw IrregularSurface("vanishing spatial gradient at a face centroid");
    grad += (s[static_cast<Eigen::Index>(f)] * mesh.area(f) / gn) * gz;
  }
  return grad;
}

void check_densities(const TriangleMesh& mesh, const std::vector<SurfaceDensity>& d) {
  if (d.empty()) throw DimensionMismatch("no densities");
  for (const auto& x : d) {
    if (static_cast<std::size_t>(x.values.size()) != mesh.face_count()) {
      throw DimensionMismatch("density length differs from the face count");
    }
  }
}

}  // namespace

VecX latent_gradient(const Decoder& decoder, const VecX& z, const TriangleMesh& mesh,
                     const std::vector<SurfaceDensity>& forward, const std::vector<SurfaceDensity>& adjoint,
                     double g_min) {
  check_densities(mesh, forward);
  check_densities(mesh, adjoint);
  if (forward.size() != adjoint.size()) throw DimensionMismatch("forward and adjoint counts differ");
  VecX s = VecX::Zero(static_cast<Eigen::Index>(mesh.face_count()));
  // Fixed l order keeps the sum reproducible.
  for (std::size_t l = 0; l < forward.size(); ++l) {
    s += (forward[l].values.array() * adjoint[l].values.array()).real().matrix();
  }
  s /= static_cast<double>(forward.size());
  return integrate_sensitivity(decoder, z, mesh, s, g_min);
}

VecX backscatter_gradient(const Decoder& decoder, const VecX& z, const TriangleMesh& mesh,
                          const std::vector<SurfaceDensity>& forward, const MeasurementConfig& config,
                          const CMatX& weights, double g_min) {
  if (config.mode != DataMode::kBackscatter) throw ModeMismatch("backscatter gradient needs backscatter data");
  check_densities(mesh, forward);
  if (forward.size() != config.rows() || static_cast<std::size_t>(weights.rows()) != config.rows() ||
      weights.cols() != 1) {
    throw DimensionMismatch("backscatter weights must be L x 1");
  }
  VecX s = VecX::Zero(static_cast<Eigen::Index>(mesh.face_count()));
  for (std::size_t l = 0; l < forward.size(); ++l) {
    const Complex c = weights(static_cast<Eigen::Index>(l), 0) / (4.0 * kPi);
    s += (c * forward[l].values.array().square()).real().matrix();
  }
  s /= static_cast<double>(forward.size());
  return integrate_sensitivity(decoder, z, mesh, s, g_min);
}

LatentObjective::LatentObjective(const Decoder& decoder, FarFieldData observed, ObjectiveOptions options)
    : decoder_(decoder), observed_(std::move(observed)), options_(std::move(options)) {
  observed_.config.validate();
  options_.grid.validate();
  if (observed_.config.mode == DataMode::kPhaseless && !(observed_.config.phaseless_eps > 0.0)) {
    throw NonPositiveEpsilon("phaseless data need eps > 0");
  }
}

Evaluation LatentObjective::evaluate(const VecX& z, bool with_gradient) const {
  const auto& cfg = observed_.config;
  Evaluation ev;
  ev.mesh = extract_surface(decoder_, z, options_.grid, options_.g_min);
  const BemSystem sys = assemble(ev.mesh, cfg.k, options_.assembly);

  std::vector<IncidentWave> waves;
  for (const auto& d : cfg.incident) waves.push_back(IncidentWave::plane(cfg.k, d));
  const auto forward = solve_densities(sys, waves, options_.gmres);
  for (const auto& s : forward) ev.solver_iterations += s.iterations;

  ev.far_field = far_field_matrix(ev.mesh, forward, cfg);
  FarFieldData sim{cfg, ev.far_field, 0.0, 0};
  ev.loss = loss(sim, observed_);
  if (!with_gradient) return ev;

  const CMatX a = residual_weights(ev.far_field, observed_);
  if (cfg.mode == DataMode::kBackscatter) {
    ev.gradient = backscatter_gradient(decoder_, z, ev.mesh, forward, cfg, a, options_.g_min);
    return ev;
  }
  std::vector<IncidentWave> adj;
  for (std::size_t l = 0; l < cfg.rows(); ++l) adj.push_back(adjoint_source(cfg, a, l));
  const auto adjoint = solve_densities(sys, adj, options_.gmres);
  for (const auto& d : adjoint) ev.solver_iterations += d.iterations;
  ev.gradient = latent_gradient(decoder_, z, ev.mesh, forward, adjoint, options_.g_min);
  return ev;
}

VecX mask_gradient(const VecX& g, double p, std::mt19937_64& rng) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("mask fraction must lie in (0, 1]");
  const auto n = g.size();
  if (n == 0) return g;
  const auto keep = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::llround(p * static_cast<double>(n))), 1, n);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  VecX out = VecX::Zero(n);
  const double scale = static_cast<double>(n) / static_cast<double>(keep);
  for (Eigen::Index i = 0; i < keep; ++i) out[idx[static_cast<std::size_t>(i)]] = scale * g[idx[static_cast<std::size_t>(i)]];
  return out;
}

VecX central_differences(const std::function<double(const VecX&)>& f, const VecX& z, double step) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  VecX g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    VecX zp = z, zm = z;
    zp[i] += step;
    zm[i] -= step;
    g[i] = (f(zp) - f(zm)) / (2.0 * step);
  }
  return g;
}

}  // namespace latscat
