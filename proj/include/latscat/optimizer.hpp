#pragma once

#include <string>
#include <vector>

#include "latscat/common.hpp"

namespace latscat {

/// Moments of the per-coordinate Adam recursion. There is no bias
/// correction; `eps_den` only guards the division.
struct AdamState {
  VecX m;
  VecX v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_den = 1e-8;

  static AdamState fresh(Eigen::Index dim, double beta1 = 0.9, double beta2 = 0.999, double eps_den = 1e-8);
  /// Throws ConfigError unless 0 <= beta1 < beta2 <= 1, eps_den >= 0 and v >= 0.
  void validate() const;
};

struct AdamResult {
  AdamState state;
  VecX z;
};

/// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  z <- z - alpha m / (sqrt(v) + eps).
AdamResult adam_step(const AdamState& state, const VecX& z, const VecX& g, double alpha);

/// In-place form of adam_step for large parameter vectors.
void adam_update(AdamState& state, Eigen::Ref<VecX> z, const Eigen::Ref<const VecX>& g, double alpha);

enum class ScheduleKind { kConstant, kStepDecay };

/// Learning-rate schedule: constant `base`, or `base / 2^(n / period)`.
struct Schedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  double base = 0.01;
  long period = 500;

  double rate(long n) const;
  /// "constant" (default base 0.01) or "decay" (default base 5e-4, period
  /// 500). Throws UnknownKind otherwise.
  static Schedule named(const std::string& kind);
};

/// Rate of the named schedule with its default parameters.
double schedule(const std::string& kind, long n);

struct StopRule {
  long max_iters = 100;
  long patience = 30;
  double rel_improve = 1e-3;
};

/// `losses` holds one value per completed iteration. Stops once max_iters
/// iterations are done, or when the best loss of the last `patience` entries
/// fails to beat the best earlier loss by the relative margin rel_improve.
bool should_stop(const std::vector<double>& losses, const StopRule& rule);

}  // namespace latscat
