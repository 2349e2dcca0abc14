#include "latscat/recon.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "latscat/errors.hpp"
#include "latscat/marching_cubes.hpp"
#include "latscat/shapes.hpp"

namespace latscat {

using json = nlohmann::json;

namespace {

// ---- config parsing -------------------------------------------------------

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  require_object(j, where);
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <class T>
void read(const json& j, const char* key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("'" + where + "." + key + "' has the wrong type");
  }
}

void read_vec3(const json& j, const char* key, const std::string& where, Vec3& out) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  read(j, key, where, v);
  if (v.size() != 3) throw ConfigError("'" + where + "." + key + "' needs three numbers");
  out = Vec3(v[0], v[1], v[2]);
}

json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

void read_grid(const json& j, const std::string& where, GridSpec& g) {
  reject_unknown(j, where, {"lower", "upper", "h"});
  read_vec3(j, "lower", where, g.lower);
  read_vec3(j, "upper", where, g.upper);
  read(j, "h", where, g.h);
}

json grid_json(const GridSpec& g) { return {{"lower", vec3_json(g.lower)}, {"upper", vec3_json(g.upper)}, {"h", g.h}}; }

std::string schedule_name(ScheduleKind k) { return k == ScheduleKind::kConstant ? "constant" : "decay"; }

// ---- misc -----------------------------------------------------------------

std::vector<char> classify(const GridSpec& grid, const std::function<bool(const Vec3&)>& inside) {
  const auto n = grid.counts();
  const long total = static_cast<long>(grid.node_count());
  std::vector<char> out(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(static)
  for (long idx = 0; idx < total; ++idx) {
    const int i = static_cast<int>(idx % n[0]);
    const int j = static_cast<int>((idx / n[0]) % n[1]);
    const int k = static_cast<int>(idx / (static_cast<long>(n[0]) * n[1]));
    out[static_cast<std::size_t>(idx)] = inside(grid.node(i, j, k)) ? 1 : 0;
  }
  return out;
}

json record_json(const IterationRecord& r) {
  return {{"iteration", r.iteration},         {"loss", r.loss},
          {"indicator_error", r.indicator_error}, {"gradient_norm", r.gradient_norm},
          {"step_norm", r.step_norm},         {"learning_rate", r.learning_rate},
          {"faces", r.faces},                 {"solver_iterations", r.solver_iterations},
          {"wall_seconds", r.wall_seconds}};
}

IterationRecord record_from_json(const json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<long>();
  r.loss = j.at("loss").get<double>();
  r.indicator_error = j.at("indicator_error").get<long>();
  r.gradient_norm = j.at("gradient_norm").get<double>();
  r.step_norm = j.at("step_norm").get<double>();
  r.learning_rate = j.at("learning_rate").get<double>();
  r.faces = j.at("faces").get<std::size_t>();
  r.solver_iterations = j.at("solver_iterations").get<int>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

std::vector<double> to_std(const VecX& v) { return {v.data(), v.data() + v.size()}; }
VecX to_eigen(const std::vector<double>& v) { return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size())); }

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << text;
    if (!out) throw IoError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Loop state persisted between iterations.
struct LoopState {
  long next = 0;      // index of the latent about to be evaluated
  bool done = false;  // the next evaluation is the final one
  bool finished = false;
  VecX z;
  AdamState adam;
  std::mt19937_64 mask_rng;
  std::vector<IterationRecord> records;
};

void write_checkpoint(const std::filesystem::path& path, const LoopState& s) {
  std::ostringstream rng;
  rng << s.mask_rng;
  json j = {{"schema_version", kRunConfigSchema},
            {"next_iteration", s.next},
            {"done", s.done},
            {"finished", s.finished},
            {"z", to_std(s.z)},
            {"adam",
             {{"m", to_std(s.adam.m)},
              {"v", to_std(s.adam.v)},
              {"step", s.adam.step},
              {"beta1", s.adam.beta1},
              {"beta2", s.adam.beta2},
              {"eps_den", s.adam.eps_den}}},
            {"mask_rng", rng.str()},
            {"records", json::array()}};
  for (const auto& r : s.records) j["records"].push_back(record_json(r));
  write_text_atomic(path, j.dump(1));
}

LoopState read_checkpoint(const std::filesystem::path& path) {
  LoopState s;
  try {
    const json j = json::parse(read_text(path));
    if (j.at("schema_version").get<int>() != kRunConfigSchema) throw ConfigError("checkpoint schema mismatch");
    s.next = j.at("next_iteration").get<long>();
    s.done = j.at("done").get<bool>();
    s.finished = j.value("finished", false);
    s.z = to_eigen(j.at("z").get<std::vector<double>>());
    const json& a = j.at("adam");
    s.adam.m = to_eigen(a.at("m").get<std::vector<double>>());
    s.adam.v = to_eigen(a.at("v").get<std::vector<double>>());
    s.adam.step = a.at("step").get<long>();
    s.adam.beta1 = a.at("beta1").get<double>();
    s.adam.beta2 = a.at("beta2").get<double>();
    s.adam.eps_den = a.at("eps_den").get<double>();
    std::istringstream rng(j.at("mask_rng").get<std::string>());
    rng >> s.mask_rng;
    if (!rng) throw IoError("bad generator state");
    for (const auto& r : j.at("records")) s.records.push_back(record_from_json(r));
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  s.adam.validate();
  return s;
}

void append_gradient_dump(const std::filesystem::path& path, long iteration, const VecX& g) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  if (fresh) out << "iteration,coordinate,value\n";
  for (Eigen::Index i = 0; i < g.size(); ++i) out << iteration << ',' << i << ',' << g[i] << '\n';
}

}  // namespace

// ---- RunConfig --------------------------------------------------------------

MeasurementConfig RunConfig::measurement() const {
  MeasurementConfig c = MeasurementConfig::fibonacci(k, incident_count, observation_count, mode);
  c.phaseless_eps = phaseless_eps;
  return c;
}

ObjectiveOptions RunConfig::objective() const {
  ObjectiveOptions o;
  o.grid = grid;
  o.assembly = assembly;
  o.gmres = gmres;
  o.g_min = g_min;
  return o;
}

void RunConfig::validate() const {
  if (decoder_kind != "analytic" && decoder_kind != "mlp") throw UnknownKind("unknown decoder kind '" + decoder_kind + "'");
  if (decoder_kind == "mlp" && weights_path.empty()) throw ConfigError("mlp decoder needs decoder.weights");
  for (const auto& p : {weights_path, codes_path}) {
    if (!p.empty() && !std::filesystem::exists(p)) throw ConfigError("file not found: " + p);
  }
  if (init_kind != "default" && init_kind != "explicit" && init_kind != "sphere" && init_kind != "training_code") {
    throw UnknownKind("unknown init kind '" + init_kind + "'");
  }
  if (init_kind == "sphere" && decoder_kind != "analytic") throw ConfigError("init.kind sphere needs the analytic decoder");
  if (init_kind == "training_code" && codes_path.empty()) throw ConfigError("init.kind training_code needs decoder.codes");
  if (init_kind == "explicit" && init_values.empty()) throw ConfigError("init.values is empty");
  if (!(init_radius > 0.0)) throw ConfigError("init.radius must be positive");
  if (incident_count < 1 || observation_count < 1) throw ConfigError("direction counts must be at least 1");
  measurement().validate();
  if (!(schedule.base > 0.0) || schedule.period < 1) throw ConfigError("learning rate and period must be positive");
  AdamState::fresh(1, beta1, beta2, eps_den).validate();
  if (!(mask_fraction > 0.0 && mask_fraction <= 1.0)) throw ConfigError("mask_fraction must lie in (0, 1]");
  if (stop.max_iters < 0 || stop.patience < 0 || !(stop.rel_improve >= 0.0)) throw ConfigError("bad stop rule");
  grid.validate();
  indicator_grid.validate();
  if (!(gmres.tol > 0.0) || gmres.max_iters < 1) throw ConfigError("bad GMRES settings");
  if (!(assembly.near_factor >= 0.0) || !(assembly.mid_factor >= assembly.near_factor)) {
    throw ConfigError("bad quadrature tier factors");
  }
  if (!(g_min > 0.0)) throw ConfigError("g_min must be positive");
  if (!(noise_delta >= 0.0)) throw NegativeDelta("noise.delta must be non-negative");
  const std::set<std::string> kinds{"none", "sphere", "ellipsoid", "mesh", "latent"};
  if (!kinds.count(target.kind)) throw UnknownKind("unknown target kind '" + target.kind + "'");
  if (target.kind == "sphere" && !(target.radius > 0.0)) throw ConfigError("target.radius must be positive");
  if (target.kind == "ellipsoid" && !(target.axes.minCoeff() > 0.0)) throw ConfigError("target.axes must be positive");
  if (target.kind == "mesh" && !std::filesystem::exists(target.path)) throw ConfigError("file not found: " + target.path);
  if (target.kind == "latent" && target.latent.empty()) throw ConfigError("target.latent is empty");
  if (output_dir.empty()) throw ConfigError("output.dir is empty");
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, "", {"schema_version", "decoder", "init", "measurement", "optimizer", "stop", "grid",
                         "indicator_grid", "solver", "noise", "seeds", "target", "output"});
  if (!j.contains("schema_version")) throw ConfigError("config lacks schema_version");
  int version = 0;
  read(j, "schema_version", "", version);
  if (version != kRunConfigSchema) {
    throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kRunConfigSchema) + ")");
  }
  RunConfig c;
  if (j.contains("decoder")) {
    const json& s = j["decoder"];
    reject_unknown(s, "decoder", {"kind", "weights", "codes"});
    read(s, "kind", "decoder", c.decoder_kind);
    read(s, "weights", "decoder", c.weights_path);
    read(s, "codes", "decoder", c.codes_path);
  }
  if (j.contains("init")) {
    const json& s = j["init"];
    reject_unknown(s, "init", {"kind", "values", "radius", "center"});
    read(s, "kind", "init", c.init_kind);
    read(s, "values", "init", c.init_values);
    read(s, "radius", "init", c.init_radius);
    read_vec3(s, "center", "init", c.init_center);
  }
  if (j.contains("measurement")) {
    const json& s = j["measurement"];
    reject_unknown(s, "measurement", {"k", "incident", "observation", "mode", "phaseless_eps"});
    read(s, "k", "measurement", c.k);
    read(s, "incident", "measurement", c.incident_count);
    read(s, "observation", "measurement", c.observation_count);
    std::string mode = to_string(c.mode);
    read(s, "mode", "measurement", mode);
    c.mode = parse_mode(mode);
    read(s, "phaseless_eps", "measurement", c.phaseless_eps);
  }
  if (j.contains("optimizer")) {
    const json& s = j["optimizer"];
    reject_unknown(s, "optimizer",
                   {"schedule", "learning_rate", "period", "beta1", "beta2", "eps_den", "mask_fraction"});
    std::string kind = schedule_name(c.schedule.kind);
    read(s, "schedule", "optimizer", kind);
    c.schedule = Schedule::named(kind);
    read(s, "learning_rate", "optimizer", c.schedule.base);
    read(s, "period", "optimizer", c.schedule.period);
    read(s, "beta1", "optimizer", c.beta1);
    read(s, "beta2", "optimizer", c.beta2);
    read(s, "eps_den", "optimizer", c.eps_den);
    read(s, "mask_fraction", "optimizer", c.mask_fraction);
  }
  if (j.contains("stop")) {
    const json& s = j["stop"];
    reject_unknown(s, "stop", {"max_iters", "patience", "rel_improve"});
    read(s, "max_iters", "stop", c.stop.max_iters);
    read(s, "patience", "stop", c.stop.patience);
    read(s, "rel_improve", "stop", c.stop.rel_improve);
  }
  if (j.contains("grid")) read_grid(j["grid"], "grid", c.grid);
  if (j.contains("indicator_grid")) read_grid(j["indicator_grid"], "indicator_grid", c.indicator_grid);
  if (j.contains("solver")) {
    const json& s = j["solver"];
    reject_unknown(s, "solver", {"gmres_tol", "gmres_max_iters", "near_factor", "mid_factor", "g_min"});
    read(s, "gmres_tol", "solver", c.gmres.tol);
    read(s, "gmres_max_iters", "solver", c.gmres.max_iters);
    read(s, "near_factor", "solver", c.assembly.near_factor);
    read(s, "mid_factor", "solver", c.assembly.mid_factor);
    read(s, "g_min", "solver", c.g_min);
  }
  if (j.contains("noise")) {
    const json& s = j["noise"];
    reject_unknown(s, "noise", {"delta"});
    read(s, "delta", "noise", c.noise_delta);
  }
  if (j.contains("seeds")) {
    const json& s = j["seeds"];
    reject_unknown(s, "seeds", {"noise", "mask", "init"});
    read(s, "noise", "seeds", c.seed_noise);
    read(s, "mask", "seeds", c.seed_mask);
    read(s, "init", "seeds", c.seed_init);
  }
  if (j.contains("target")) {
    const json& s = j["target"];
    reject_unknown(s, "target", {"kind", "center", "radius", "axes", "path", "latent", "refine"});
    read(s, "kind", "target", c.target.kind);
    read_vec3(s, "center", "target", c.target.center);
    read(s, "radius", "target", c.target.radius);
    read_vec3(s, "axes", "target", c.target.axes);
    read(s, "path", "target", c.target.path);
    read(s, "latent", "target", c.target.latent);
    read(s, "refine", "target", c.refine_target);
  }
  if (j.contains("output")) {
    const json& s = j["output"];
    reject_unknown(s, "output", {"dir", "save_meshes", "dump_gradients"});
    read(s, "dir", "output", c.output_dir);
    read(s, "save_meshes", "output", c.save_meshes);
    read(s, "dump_gradients", "output", c.dump_gradients);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_run_config(read_text(path));
}

std::string dump_run_config(const RunConfig& c) {
  json j;
  j["schema_version"] = kRunConfigSchema;
  j["decoder"] = {{"kind", c.decoder_kind}, {"weights", c.weights_path}, {"codes", c.codes_path}};
  j["init"] = {{"kind", c.init_kind}, {"values", c.init_values}, {"radius", c.init_radius}, {"center", vec3_json(c.init_center)}};
  j["measurement"] = {{"k", c.k},
                      {"incident", c.incident_count},
                      {"observation", c.observation_count},
                      {"mode", to_string(c.mode)},
                      {"phaseless_eps", c.phaseless_eps}};
  j["optimizer"] = {{"schedule", schedule_name(c.schedule.kind)},
                    {"learning_rate", c.schedule.base},
                    {"period", c.schedule.period},
                    {"beta1", c.beta1},
                    {"beta2", c.beta2},
                    {"eps_den", c.eps_den},
                    {"mask_fraction", c.mask_fraction}};
  j["stop"] = {{"max_iters", c.stop.max_iters}, {"patience", c.stop.patience}, {"rel_improve", c.stop.rel_improve}};
  j["grid"] = grid_json(c.grid);
  j["indicator_grid"] = grid_json(c.indicator_grid);
  j["solver"] = {{"gmres_tol", c.gmres.tol},
                 {"gmres_max_iters", c.gmres.max_iters},
                 {"near_factor", c.assembly.near_factor},
                 {"mid_factor", c.assembly.mid_factor},
                 {"g_min", c.g_min}};
  j["noise"] = {{"delta", c.noise_delta}};
  j["seeds"] = {{"noise", c.seed_noise}, {"mask", c.seed_mask}, {"init", c.seed_init}};
  j["target"] = {{"kind", c.target.kind},     {"center", vec3_json(c.target.center)},
                 {"radius", c.target.radius}, {"axes", vec3_json(c.target.axes)},
                 {"path", c.target.path},     {"latent", c.target.latent},
                 {"refine", c.refine_target}};
  j["output"] = {{"dir", c.output_dir}, {"save_meshes", c.save_meshes}, {"dump_gradients", c.dump_gradients}};
  return j.dump(2) + "\n";
}

// ---- setup helpers -----------------------------------------------------------

std::unique_ptr<Decoder> make_decoder(const RunConfig& config) {
  if (config.decoder_kind == "analytic") return std::make_unique<AnalyticFamily>();
  if (config.decoder_kind == "mlp") return std::make_unique<MlpDecoder>(read_weights(config.weights_path));
  throw UnknownKind("unknown decoder kind '" + config.decoder_kind + "'");
}

VecX initial_latent(const RunConfig& config, const Decoder& decoder) {
  const int dim = decoder.latent_dim();
  VecX z;
  if (config.init_kind == "explicit") {
    z = to_eigen(config.init_values);
  } else if (config.init_kind == "training_code" || (config.init_kind == "default" && config.decoder_kind == "mlp")) {
    if (config.codes_path.empty()) throw ConfigError("drawing a training code needs decoder.codes");
    const auto codes = read_codes(config.codes_path);
    if (codes.empty()) throw EmptyDataset("no training codes in " + config.codes_path);
    std::mt19937_64 rng(config.seed_init);
    std::uniform_int_distribution<std::size_t> pick(0, codes.size() - 1);
    z = codes[pick(rng)];
  } else {
    const auto* fam = dynamic_cast<const AnalyticFamily*>(&decoder);
    if (fam == nullptr) throw ConfigError("sphere initialisation needs the analytic decoder");
    z = fam->sphere(config.init_radius, config.init_center);
  }
  if (z.size() != dim) {
    throw DimensionMismatch("initial latent has " + std::to_string(z.size()) + " entries, decoder expects " +
                            std::to_string(dim));
  }
  return z;
}

std::function<bool(const Vec3&)> target_inside(const RunConfig& config, const Decoder& decoder) {
  const TargetSpec& t = config.target;
  if (t.kind == "sphere") {
    return [c = t.center, r = t.radius](const Vec3& x) { return (x - c).norm() <= r; };
  }
  if (t.kind == "ellipsoid") {
    return [e = Ellipsoid{t.center, t.axes}](const Vec3& x) { return e.contains(x); };
  }
  if (t.kind == "mesh") {
    auto mesh = std::make_shared<TriangleMesh>(read_obj(t.path));
    return [mesh](const Vec3& x) { return point_inside(*mesh, x); };
  }
  if (t.kind == "latent") {
    const VecX z = to_eigen(t.latent);
    if (z.size() != decoder.latent_dim()) throw DimensionMismatch("target latent size differs from the decoder's");
    return [&decoder, z](const Vec3& x) { return decoder.evaluate(z, x) <= 0.0; };
  }
  return {};
}

FarFieldData simulate_target(const RunConfig& config, const Decoder& decoder) {
  config.validate();
  const MeasurementConfig mc = config.measurement();
  SimulationOptions opt;
  opt.grid = config.grid;
  opt.refine_grid = config.refine_target;
  opt.assembly = config.assembly;
  opt.gmres = config.gmres;
  const TargetSpec& t = config.target;
  FarFieldData data;
  if (t.kind == "sphere") {
    data = simulate_data([c = t.center, r = t.radius](const Vec3& x) { return (x - c).norm() - r; }, mc, opt);
  } else if (t.kind == "ellipsoid") {
    const Ellipsoid e{t.center, t.axes};
    data = simulate_data([&e](const Vec3& x) { return e.sdf(x); }, mc, opt);
  } else if (t.kind == "mesh") {
    data = simulate_data(read_obj(t.path), mc, opt);
  } else if (t.kind == "latent") {
    data = simulate_data(decoder, to_eigen(t.latent), mc, opt);
  } else {
    throw ConfigError("simulate needs a target");
  }
  return add_noise(data, config.noise_delta, config.seed_noise);
}

// ---- artifacts ------------------------------------------------------------------

void write_records_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& records) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "iteration,loss,indicator_error,gradient_norm,step_norm,learning_rate,faces,solver_iterations,wall_seconds\n";
  for (const auto& r : records) {
    out << r.iteration << ',' << r.loss << ',' << r.indicator_error << ',' << r.gradient_norm << ',' << r.step_norm
        << ',' << r.learning_rate << ',' << r.faces << ',' << r.solver_iterations << ',' << r.wall_seconds << '\n';
  }
  write_text_atomic(path, out.str());
}

std::vector<IterationRecord> read_records_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("iteration,loss,", 0) != 0) throw IoError(path.string() + " is not a records file");
  std::vector<IterationRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    IterationRecord r;
    char c1, c2, c3, c4, c5, c6, c7, c8;
    ls >> r.iteration >> c1 >> r.loss >> c2 >> r.indicator_error >> c3 >> r.gradient_norm >> c4 >> r.step_norm >> c5 >>
        r.learning_rate >> c6 >> r.faces >> c7 >> r.solver_iterations >> c8 >> r.wall_seconds;
    if (!ls) throw IoError("malformed record line in " + path.string());
    out.push_back(r);
  }
  return out;
}

void write_latent_csv(const std::filesystem::path& path, const VecX& z) {
  std::ostringstream out;
  out << std::setprecision(17) << "index,value\n";
  for (Eigen::Index i = 0; i < z.size(); ++i) out << i << ',' << z[i] << '\n';
  write_text_atomic(path, out.str());
}

VecX read_latent_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (line != "index,value") throw IoError(path.string() + " is not a latent file");
  std::vector<double> v;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("malformed latent line in " + path.string());
    try {
      if (std::stoul(line.substr(0, comma)) != v.size()) throw IoError("latent indices out of order");
      v.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw IoError("malformed latent line in " + path.string());
    }
  }
  return to_eigen(v);
}

bool mesh_logged(long iteration, long max_iters, bool last) {
  if (iteration == 0 || last) return true;
  const long every = std::max<long>(1, (max_iters + 7) / 8);
  return iteration % every == 0;
}

RunLock::RunLock(const std::filesystem::path& dir) : path_(dir / "run.lock") {
  std::filesystem::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw ConfigError("run directory " + dir.string() + " is locked by another process (" + path_.string() + ")");
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

// ---- the reconstruction loop ------------------------------------------------------

ReconResult reconstruct(const RunConfig& config, const Decoder& decoder, const FarFieldData& observed,
                        const VecX& z0, const std::function<bool(const Vec3&)>& truth, const ReconOptions& options) {
  config.validate();
  if (z0.size() != decoder.latent_dim()) throw DimensionMismatch("initial latent size differs from the decoder's");
  const LatentObjective objective(decoder, observed, config.objective());

  const bool persist = !options.run_dir.empty();
  const auto& dir = options.run_dir;
  std::unique_ptr<RunLock> lock;
  if (persist) {
    lock = std::make_unique<RunLock>(dir);
    std::filesystem::create_directories(dir / "meshes");
  }
  const auto checkpoint = dir / "checkpoint.json";

  LoopState s;
  if (options.resume && persist && std::filesystem::exists(checkpoint)) {
    s = read_checkpoint(checkpoint);
    if (s.z.size() != z0.size()) throw ConfigError("checkpoint latent size differs from the decoder's");
  } else {
    s.z = z0;
    s.adam = AdamState::fresh(z0.size(), config.beta1, config.beta2, config.eps_den);
    s.mask_rng.seed(config.seed_mask);
    s.done = config.stop.max_iters <= 0;
    if (persist) {
      write_text_atomic(dir / "config.json", dump_run_config(config));
      write_text_atomic(dir / "seeds.json", json({{"noise", config.seed_noise},
                                                   {"mask", config.seed_mask},
                                                   {"init", config.seed_init},
                                                   {"data_noise_seed", observed.noise_seed},
                                                   {"data_delta", observed.delta}})
                                                  .dump(2) + "\n");
      std::filesystem::remove(dir / "gradients.csv");
    }
  }

  std::vector<char> truth_mask;
  if (truth) truth_mask = classify(config.indicator_grid, truth);

  ReconResult result;
  long evaluated = 0;
  bool finished = s.finished;
  while (!finished) {
    const long n = s.next;
    const auto t0 = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.iteration = n;
    try {
      Evaluation ev = objective.evaluate(s.z, !s.done);
      rec.loss = ev.loss;
      rec.faces = ev.mesh.face_count();
      rec.solver_iterations = ev.solver_iterations;
      if (truth) {
        const auto cand = classify(config.indicator_grid, [&](const Vec3& x) { return decoder.evaluate(s.z, x) <= 0.0; });
        long diff = 0;
        for (std::size_t i = 0; i < cand.size(); ++i) diff += cand[i] != truth_mask[i];
        rec.indicator_error = diff;
      }
      if (persist && config.save_meshes && mesh_logged(n, config.stop.max_iters, s.done)) {
        char name[32];
        std::snprintf(name, sizeof name, "iter_%04ld.obj", n);
        write_obj(ev.mesh, dir / "meshes" / name);
      }
      if (!s.done) {
        rec.gradient_norm = ev.gradient.norm();
        if (persist && config.dump_gradients) append_gradient_dump(dir / "gradients.csv", n, ev.gradient);
        const VecX g = config.mask_fraction < 1.0 ? mask_gradient(ev.gradient, config.mask_fraction, s.mask_rng)
                                                  : ev.gradient;
        rec.learning_rate = config.schedule.rate(n);
        const VecX before = s.z;
        adam_update(s.adam, s.z, g, rec.learning_rate);
        rec.step_norm = (s.z - before).norm();
      }
      result.mesh = std::move(ev.mesh);
    } catch (const Error& e) {
      if (persist) write_records_csv(dir / "records.csv", s.records);
      throw Error(e.error_class(), "iteration " + std::to_string(n) + ": " + e.what());
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool final_record = s.done;
    s.records.push_back(rec);
    if (options.on_record) options.on_record(rec);
    ++evaluated;

    if (!final_record) {
      std::vector<double> losses;
      for (const auto& r : s.records) losses.push_back(r.loss);
      s.done = should_stop(losses, config.stop);
      s.next = n + 1;
    }
    s.finished = final_record;
    if (persist) {
      write_records_csv(dir / "records.csv", s.records);
      write_checkpoint(checkpoint, s);
    }
    if (final_record) {
      finished = true;
      break;
    }
    if (options.halt_after >= 0 && evaluated >= options.halt_after) break;
  }

  // A resumed run that had already finished only needs its surface rebuilt.
  if (finished && result.mesh.face_count() == 0) result.mesh = extract_surface(decoder, s.z, config.grid, config.g_min);
  result.z = s.z;
  result.records = s.records;
  if (persist && finished) write_latent_csv(dir / "latent_final.csv", s.z);
  return result;
}

}  // namespace latscat
