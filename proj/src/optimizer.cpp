#include "latscat/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "latscat/errors.hpp"

namespace latscat {

AdamState AdamState::fresh(Eigen::Index dim, double beta1, double beta2, double eps_den) {
  AdamState s;
  s.m = VecX::Zero(dim);
  s.v = VecX::Zero(dim);
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps_den = eps_den;
  s.validate();
  return s;
}

void AdamState::validate() const {
  if (!(beta1 >= 0.0 && beta1 < beta2 && beta2 <= 1.0)) throw ConfigError("adam: need 0 <= beta1 < beta2 <= 1");
  if (!(eps_den >= 0.0)) throw ConfigError("adam: eps_den must be non-negative");
  if (m.size() != v.size()) throw DimensionMismatch("adam: moment vectors differ in length");
  if (step < 0 || (v.array() < 0.0).any()) throw ConfigError("adam: negative second moment or step");
}

void adam_update(AdamState& s, Eigen::Ref<VecX> z, const Eigen::Ref<const VecX>& g, double alpha) {
  if (z.size() != g.size() || z.size() != s.m.size() || s.m.size() != s.v.size()) {
    throw DimensionMismatch("adam: z, g and moments must share one length");
  }
  if (!(alpha > 0.0)) throw ConfigError("adam: step size must be positive");
  const double b1 = s.beta1, b2 = s.beta2, eps = s.eps_den;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    s.m[i] = b1 * s.m[i] + (1.0 - b1) * g[i];
    s.v[i] = b2 * s.v[i] + (1.0 - b2) * (g[i] * g[i]);
    z[i] = z[i] - alpha * s.m[i] / (std::sqrt(s.v[i]) + eps);
  }
  ++s.step;
}

AdamResult adam_step(const AdamState& state, const VecX& z, const VecX& g, double alpha) {
  AdamResult r{state, z};
  adam_update(r.state, r.z, g, alpha);
  return r;
}

double Schedule::rate(long n) const {
  if (n < 0) throw ConfigError("schedule: iteration index must be non-negative");
  switch (kind) {
    case ScheduleKind::kConstant:
      return base;
    case ScheduleKind::kStepDecay:
      return std::ldexp(base, -static_cast<int>(std::min<long>(n / period, 1000)));
  }
  return base;
}

Schedule Schedule::named(const std::string& kind) {
  if (kind == "constant") return {ScheduleKind::kConstant, 0.01, 500};
  if (kind == "decay") return {ScheduleKind::kStepDecay, 5e-4, 500};
  throw UnknownKind("unknown schedule kind '" + kind + "'");
}

double schedule(const std::string& kind, long n) { return Schedule::named(kind).rate(n); }

bool should_stop(const std::vector<double>& losses, const StopRule& rule) {
  if (losses.empty()) throw ConfigError("should_stop: empty loss history");
  const long n = static_cast<long>(losses.size());
  if (n >= rule.max_iters) return true;
  if (rule.patience <= 0 || n <= rule.patience) return false;
  const auto split = losses.end() - rule.patience;
  const double before = *std::min_element(losses.begin(), split);
  const double recent = *std::min_element(split, losses.end());
  return !(recent < before - rule.rel_improve * std::abs(before));
}

}  // namespace latscat
