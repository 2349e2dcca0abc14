// Command-line front end: simulate, reconstruct, forward, gradcheck,
// train-decoder and mie.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "latscat/errors.hpp"
#include "latscat/gradient.hpp"
#include "latscat/measurement.hpp"
#include "latscat/mie.hpp"
#include "latscat/recon.hpp"
#include "latscat/shapes.hpp"
#include "latscat/trainer.hpp"

using namespace latscat;

namespace {

int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::kConfig: return 2;
    case ErrorClass::kSolver: return 3;
    case ErrorClass::kSurface: return 4;
    default: return 1;
  }
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

int run_simulate(const std::string& config_path, const std::string& out) {
  const RunConfig cfg = load_run_config(config_path);
  if (!cfg.target.present()) throw ConfigError("simulate needs a target section");
  const auto decoder = make_decoder(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const FarFieldData data = simulate_target(cfg, *decoder);
  write_far_field(out, data);
  log_line("wrote " + out + " (" + std::to_string(data.values.rows()) + " x " + std::to_string(data.values.cols()) +
           ", " + std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s)");
  return 0;
}

int run_reconstruct(const std::string& config_path, const std::string& data_path, std::string out_dir, bool resume) {
  const RunConfig cfg = load_run_config(config_path);
  if (out_dir.empty()) out_dir = cfg.output_dir;
  const FarFieldData data = read_far_field(data_path);
  if (!data.config.same_measurements(cfg.measurement())) {
    throw ConfigMismatch("data file and config describe different measurements");
  }
  const auto decoder = make_decoder(cfg);
  const VecX z0 = initial_latent(cfg, *decoder);
  ReconOptions opt;
  opt.run_dir = out_dir;
  opt.resume = resume;
  opt.on_record = [](const IterationRecord& r) {
    char line[256];
    std::snprintf(line, sizeof line, "iter %4ld  loss %.6e  |g| %.3e  step %.3e  indicator %ld  faces %zu  %.1fs",
                  r.iteration, r.loss, r.gradient_norm, r.step_norm, r.indicator_error, r.faces, r.wall_seconds);
    log_line(line);
  };
  const ReconResult res = reconstruct(cfg, *decoder, data, z0, target_inside(cfg, *decoder), opt);
  log_line("final latent written to " + (std::filesystem::path(out_dir) / "latent_final.csv").string());
  (void)res;
  return 0;
}

int run_forward(const std::string& config_path, const std::string& mesh_path, const std::string& latent_path,
                const std::string& out) {
  const RunConfig cfg = load_run_config(config_path);
  if (mesh_path.empty() == latent_path.empty()) throw ConfigError("give exactly one of --mesh or --latent");
  SimulationOptions opt;
  opt.grid = cfg.grid;
  opt.refine_grid = false;
  opt.assembly = cfg.assembly;
  opt.gmres = cfg.gmres;
  FarFieldData data;
  if (!mesh_path.empty()) {
    data = simulate_data(read_obj(mesh_path), cfg.measurement(), opt);
  } else {
    const auto decoder = make_decoder(cfg);
    data = simulate_data(*decoder, read_latent_csv(latent_path), cfg.measurement(), opt);
  }
  write_far_field(out, data);
  log_line("wrote " + out);
  return 0;
}

int run_gradcheck(const std::string& config_path, const std::string& data_path, const std::string& latent_path,
                  double step) {
  const RunConfig cfg = load_run_config(config_path);
  const auto decoder = make_decoder(cfg);
  const FarFieldData data = data_path.empty() ? simulate_target(cfg, *decoder) : read_far_field(data_path);
  const VecX z = latent_path.empty() ? initial_latent(cfg, *decoder) : read_latent_csv(latent_path);
  const LatentObjective obj(*decoder, data, cfg.objective());
  const Evaluation ev = obj.evaluate(z);
  const VecX fd = central_differences([&](const VecX& q) { return obj.loss_only(q); }, z, step);
  std::printf("# mode %s, loss %.10e, step %g\n", to_string(data.config.mode).c_str(), ev.loss, step);
  std::printf("%5s %18s %18s %12s\n", "coord", "adjoint", "finite_diff", "rel_error");
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    std::printf("%5ld %18.10e %18.10e %12.4e\n", static_cast<long>(i), ev.gradient[i], fd[i],
                std::abs(ev.gradient[i] - fd[i]) / std::abs(fd[i]));
  }
  const double cosine = ev.gradient.dot(fd) / (ev.gradient.norm() * fd.norm());
  std::printf("cosine_similarity %.8f\n", cosine);
  return 0;
}

// Manifest: a directory of *.bin sample files, or a JSON file
// {"ellipsoids": [{"center": [..], "axes": [..]}, ...], "samples": N, "seed": s}.
std::vector<SdfSampleSet> load_training_set(const std::string& manifest) {
  if (std::filesystem::is_directory(manifest)) return read_dataset(manifest);
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad manifest: " + std::string(e.what()));
  }
  for (const auto& [k, v] : j.items()) {
    if (k != "ellipsoids" && k != "samples" && k != "seed") throw ConfigError("unknown manifest key '" + k + "'");
  }
  const std::size_t samples = j.value("samples", std::size_t{4000});
  const std::uint64_t seed = j.value("seed", std::uint64_t{1});
  std::vector<SdfSampleSet> out;
  std::size_t i = 0;
  try {
    for (const auto& e : j.at("ellipsoids")) {
      const auto c = e.at("center").get<std::vector<double>>();
      const auto a = e.at("axes").get<std::vector<double>>();
      if (c.size() != 3 || a.size() != 3) throw ConfigError("ellipsoid entries need 3-vectors");
      SampleOptions so;
      so.count = samples;
      so.seed = seed + i++;
      out.push_back(sample_sdf(Ellipsoid{Vec3(c[0], c[1], c[2]), Vec3(a[0], a[1], a[2])}, so));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad manifest: " + std::string(e.what()));
  }
  return out;
}

int run_train(const std::string& manifest, const std::string& weights_out, const std::string& codes_out, TrainOptions opt,
              const std::string& activation) {
  if (activation == "softplus") {
    opt.activation = Activation::kSoftplus;
  } else if (activation == "tanh") {
    opt.activation = Activation::kTanh;
  } else {
    throw UnknownKind("unknown activation '" + activation + "'");
  }
  const auto data = load_training_set(manifest);
  opt.on_epoch = [](int e, double loss) {
    if (e % 10 == 0) log_line("epoch " + std::to_string(e) + "  loss " + std::to_string(loss));
  };
  const TrainResult t = train_decoder(data, opt);
  write_weights(weights_out, t.weights);
  write_codes(codes_out, t.codes);
  log_line("wrote " + weights_out + " and " + codes_out);
  return 0;
}

int run_mie(double radius, const std::vector<double>& center, double k, int incident, int observation,
            const std::string& out) {
  if (center.size() != 3) throw ConfigError("--center needs three numbers");
  if (!(radius > 0.0)) throw ConfigError("--radius must be positive");
  const MeasurementConfig cfg = MeasurementConfig::fibonacci(k, incident, observation);
  const SphereScatterer s{radius, Vec3(center[0], center[1], center[2])};
  FarFieldData data;
  data.config = cfg;
  data.values.resize(incident, observation);
  for (int l = 0; l < incident; ++l) {
    for (int m = 0; m < observation; ++m) {
      data.values(l, m) = mie_far_field(s, k, cfg.incident[static_cast<std::size_t>(l)],
                                        cfg.observation[static_cast<std::size_t>(m)]);
    }
  }
  write_far_field(out, data);
  log_line("wrote " + out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-shape inverse obstacle scattering"};
  app.require_subcommand(1);

  std::string config, data, out, mesh, latent;
  bool resume = false;
  double step = 1e-3;

  auto* sim = app.add_subcommand("simulate", "Synthetic far-field data for the configured target");
  sim->add_option("-c,--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", out, "Output data file")->required();

  auto* rec = app.add_subcommand("reconstruct", "Recover a latent code from far-field data");
  rec->add_option("-c,--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  rec->add_option("-d,--data", data, "Far-field data file")->required()->check(CLI::ExistingFile);
  rec->add_option("-o,--out", out, "Run directory (defaults to output.dir)");
  rec->add_flag("--resume", resume, "Continue from the run directory's checkpoint");

  auto* fwd = app.add_subcommand("forward", "Far field of a mesh or latent code");
  fwd->add_option("-c,--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  fwd->add_option("--mesh", mesh, "OBJ mesh")->check(CLI::ExistingFile);
  fwd->add_option("--latent", latent, "Latent CSV")->check(CLI::ExistingFile);
  fwd->add_option("-o,--out", out, "Output data file")->required();

  auto* gc = app.add_subcommand("gradcheck", "Compare the adjoint gradient with central differences");
  gc->add_option("-c,--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  gc->add_option("-d,--data", data, "Far-field data file (default: simulate the target)")->check(CLI::ExistingFile);
  gc->add_option("--latent", latent, "Latent CSV (default: the configured initial latent)")->check(CLI::ExistingFile);
  gc->add_option("--step", step, "Finite-difference step")->check(CLI::PositiveNumber);

  TrainOptions topt;
  std::string manifest, weights_out = "decoder.bin", codes_out = "codes.csv", activation = "softplus";
  auto* tr = app.add_subcommand("train-decoder", "Fit an MLP decoder and per-shape codes to SDF samples");
  tr->add_option("-m,--manifest", manifest, "Sample directory or ellipsoid manifest (JSON)")->required()->check(CLI::ExistingPath);
  tr->add_option("--weights", weights_out, "Output weights file");
  tr->add_option("--codes", codes_out, "Output codes CSV");
  tr->add_option("--latent-dim", topt.latent_dim, "Latent dimension")->check(CLI::PositiveNumber);
  tr->add_option("--hidden", topt.hidden, "Hidden layer widths");
  tr->add_option("--epochs", topt.epochs, "Epochs")->check(CLI::PositiveNumber);
  tr->add_option("--lambda", topt.lambda, "Code penalty weight")->check(CLI::NonNegativeNumber);
  tr->add_option("--batch", topt.batch_per_shape, "Points per shape per step")->check(CLI::PositiveNumber);
  tr->add_option("--lr", topt.schedule.base, "Base learning rate")->check(CLI::PositiveNumber);
  tr->add_option("--lr-period", topt.schedule.period, "Epochs per halving")->check(CLI::PositiveNumber);
  tr->add_option("--activation", activation, "softplus or tanh");
  tr->add_option("--seed", topt.seed, "Random seed");

  double radius = 0.5, k = kPi;
  std::vector<double> center{0.0, 0.0, 0.0};
  int incident = 1, observation = 100;
  auto* mie = app.add_subcommand("mie", "Exact far field of a sound-soft sphere");
  mie->add_option("--radius", radius, "Sphere radius");
  mie->add_option("--center", center, "Sphere centre")->expected(3);
  mie->add_option("--k", k, "Wavenumber")->check(CLI::PositiveNumber);
  mie->add_option("--incident", incident, "Number of incident directions")->check(CLI::PositiveNumber);
  mie->add_option("--observation", observation, "Number of observation directions")->check(CLI::PositiveNumber);
  mie->add_option("-o,--out", out, "Output data file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sim) return run_simulate(config, out);
    if (*rec) return run_reconstruct(config, data, out, resume);
    if (*fwd) return run_forward(config, mesh, latent, out);
    if (*gc) return run_gradcheck(config, data, latent, step);
    if (*tr) return run_train(manifest, weights_out, codes_out, topt, activation);
    if (*mie) return run_mie(radius, center, k, incident, observation, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return exit_code(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
