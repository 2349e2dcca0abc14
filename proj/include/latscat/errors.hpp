#pragma once

#include <stdexcept>
#include <string>

namespace latscat {

/// Coarse failure classes; the CLI maps these onto process exit codes.
enum class ErrorClass {
  kUsage,
  kConfig,
  kSolver,
  kSurface,
  kNumeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

#define LATSCAT_DEFINE_ERROR(Name, Class)                                        \
  class Name : public Error {                                                    \
   public:                                                                       \
    explicit Name(const std::string& what) : Error(ErrorClass::Class, what) {}   \
  };

// geometry / latent shape
LATSCAT_DEFINE_ERROR(NoSurface, kSurface)
LATSCAT_DEFINE_ERROR(OpenSurface, kSurface)
LATSCAT_DEFINE_ERROR(IrregularSurface, kSurface)
LATSCAT_DEFINE_ERROR(DegenerateMesh, kSurface)
LATSCAT_DEFINE_ERROR(DimensionMismatch, kNumeric)
LATSCAT_DEFINE_ERROR(EmptyDataset, kConfig)
// oracle
LATSCAT_DEFINE_ERROR(SeriesNotConverged, kNumeric)
LATSCAT_DEFINE_ERROR(PointInside, kNumeric)
// measurement / loss
LATSCAT_DEFINE_ERROR(NonPositiveN, kConfig)
LATSCAT_DEFINE_ERROR(NegativeDelta, kConfig)
LATSCAT_DEFINE_ERROR(ConfigMismatch, kConfig)
LATSCAT_DEFINE_ERROR(NonPositiveEpsilon, kConfig)
LATSCAT_DEFINE_ERROR(ModeMismatch, kConfig)
LATSCAT_DEFINE_ERROR(UnknownKind, kConfig)
LATSCAT_DEFINE_ERROR(ConfigError, kConfig)
LATSCAT_DEFINE_ERROR(IoError, kConfig)

#undef LATSCAT_DEFINE_ERROR

/// GMRES did not reach the requested relative residual.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, int iterations, double residual)
      : Error(ErrorClass::kSolver, what), iterations_(iterations), residual_(residual) {}
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

}  // namespace latscat
