#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latscat/bem.hpp"
#include "latscat/decoder.hpp"
#include "latscat/gradient.hpp"
#include "latscat/grid.hpp"
#include "latscat/measurement.hpp"
#include "latscat/optimizer.hpp"

namespace latscat {

inline constexpr int kRunConfigSchema = 1;

/// Ground-truth shape used by `simulate` and for indicator errors.
struct TargetSpec {
  std::string kind = "none";  // none | sphere | ellipsoid | mesh | latent
  Vec3 center = Vec3::Zero();
  double radius = 0.5;
  Vec3 axes{0.5, 0.5, 0.5};
  std::string path;           // mesh
  std::vector<double> latent; // latent, decoded with the run's decoder

  bool present() const { return kind != "none"; }
};

/// Every setting of a simulate or reconstruct run. Read from JSON with a
/// versioned schema; unknown keys are errors.
struct RunConfig {
  // decoder
  std::string decoder_kind = "analytic";  // analytic | mlp
  std::string weights_path;
  std::string codes_path;

  // initial latent
  std::string init_kind = "default";  // default | explicit | sphere | training_code
  std::vector<double> init_values;
  double init_radius = 0.3;
  Vec3 init_center = Vec3::Zero();

  // measurement: Fibonacci incident and observation sets
  double k = 5.0 * kPi;
  int incident_count = 4;
  int observation_count = 100;
  DataMode mode = DataMode::kFull;
  double phaseless_eps = 0.0;

  Schedule schedule{ScheduleKind::kConstant, 0.01, 500};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_den = 1e-8;
  double mask_fraction = 1.0;
  StopRule stop;

  GridSpec grid;
  GridSpec indicator_grid;
  AssemblyOptions assembly;
  GmresOptions gmres;
  double g_min = 1e-6;

  double noise_delta = 0.0;
  std::uint64_t seed_noise = 1;
  std::uint64_t seed_mask = 2;
  std::uint64_t seed_init = 3;

  TargetSpec target;
  bool refine_target = true;

  std::string output_dir = "run";
  bool save_meshes = true;
  bool dump_gradients = false;

  MeasurementConfig measurement() const;
  ObjectiveOptions objective() const;
  /// Throws ConfigError (or UnknownKind) on any invalid combination.
  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

/// Decoder named by the config; throws IoError for unreadable weights.
std::unique_ptr<Decoder> make_decoder(const RunConfig& config);

/// Initial latent per config. Training codes are drawn with seed_init.
VecX initial_latent(const RunConfig& config, const Decoder& decoder);

/// Inside test for the configured target; empty when there is none.
std::function<bool(const Vec3&)> target_inside(const RunConfig& config, const Decoder& decoder);

/// Synthetic data for the configured target, with noise_delta applied using
/// seed_noise.
FarFieldData simulate_target(const RunConfig& config, const Decoder& decoder);

struct IterationRecord {
  long iteration = 0;
  double loss = 0.0;
  long indicator_error = -1;  // -1 without a target
  double gradient_norm = 0.0;
  double step_norm = 0.0;     // |z_{n+1} - z_n|, zero on the final record
  double learning_rate = 0.0;
  std::size_t faces = 0;
  int solver_iterations = 0;
  double wall_seconds = 0.0;
};

struct ReconResult {
  VecX z;
  TriangleMesh mesh;
  std::vector<IterationRecord> records;
};

struct ReconOptions {
  /// Run directory for artifacts and checkpoints; empty keeps everything in
  /// memory.
  std::filesystem::path run_dir;
  /// Continue from run_dir/checkpoint.json when present.
  bool resume = false;
  /// Stop after this many further iterations, leaving a checkpoint (for
  /// testing interruption). Negative means no limit.
  long halt_after = -1;
  /// Called after every record.
  std::function<void(const IterationRecord&)> on_record;
};

/// The iteration: extract surface, forward and adjoint solves, gradient,
/// optional coordinate mask, Adam step, until the stop rule fires. One
/// record per evaluated latent; the last record describes the returned one.
/// Module errors are rethrown with the iteration index after the partial
/// trace has been written.
ReconResult reconstruct(const RunConfig& config, const Decoder& decoder, const FarFieldData& observed,
                        const VecX& z0, const std::function<bool(const Vec3&)>& truth = {},
                        const ReconOptions& options = {});

void write_records_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& records);
std::vector<IterationRecord> read_records_csv(const std::filesystem::path& path);
void write_latent_csv(const std::filesystem::path& path, const VecX& z);
VecX read_latent_csv(const std::filesystem::path& path);

/// Iterations whose meshes are saved: every ceil(max_iters / 8) plus the first and last.
bool mesh_logged(long iteration, long max_iters, bool last);

/// Exclusive claim on a run directory through a lock file; throws ConfigError
/// if another process holds it.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace latscat
