// Drives the latscat executable end to end through std::system.

#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "latscat/gradient.hpp"
#include "latscat/marching_cubes.hpp"
#include "latscat/measurement.hpp"
#include "latscat/mesh.hpp"
#include "latscat/recon.hpp"

#ifndef LATSCAT_CLI
#error "LATSCAT_CLI must name the command-line executable"
#endif

using namespace latscat;
namespace fs = std::filesystem;

namespace {

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("latscat_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + LATSCAT_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kSmallConfig = R"({
  "schema_version": 1,
  "measurement": {"k": 3.141592653589793, "incident": 2, "observation": 16},
  "stop": {"max_iters": 0},
  "grid": {"h": 0.12},
  "indicator_grid": {"h": 0.1},
  "init": {"kind": "sphere", "radius": 0.35, "center": [0.02, 0.0, -0.01]},
  "noise": {"delta": 0.1},
  "seeds": {"noise": 7},
  "target": {"kind": "ellipsoid", "axes": [0.5, 0.4, 0.45], "refine": false}
})";

}  // namespace

TEST_CASE("simulate then reconstruct: the logged loss is reproducible from the files") {
  const fs::path dir = work_dir("roundtrip");
  write(dir / "cfg.json", kSmallConfig);
  REQUIRE(run("simulate -c " + (dir / "cfg.json").string() + " -o " + (dir / "data.txt").string(), dir / "sim.log") == 0);
  REQUIRE(run("reconstruct -c " + (dir / "cfg.json").string() + " -d " + (dir / "data.txt").string() + " -o " +
                  (dir / "run").string(),
              dir / "rec.log") == 0);

  const FarFieldData data = read_far_field(dir / "data.txt");
  CHECK(data.delta == 0.1);
  CHECK(data.noise_seed == 7);
  const RunConfig cfg = load_run_config(dir / "run" / "config.json");
  const VecX z = read_latent_csv(dir / "run" / "latent_final.csv");
  const auto records = read_records_csv(dir / "run" / "records.csv");
  REQUIRE(records.size() == 1);

  const AnalyticFamily fam;
  const LatentObjective objective(fam, data, cfg.objective());
  const double recomputed = objective.loss_only(z);
  CHECK(std::abs(recomputed - records[0].loss) <= 1e-12 * std::abs(records[0].loss));
  CHECK(records[0].indicator_error > 0);
  CHECK(slurp(dir / "rec.log").find("iter    0") != std::string::npos);
  CHECK(fs::exists(dir / "run" / "seeds.json"));
}

TEST_CASE("forward on a sphere mesh agrees with the mie subcommand") {
  const fs::path dir = work_dir("forward");
  GridSpec g;
  g.h = 0.08;
  write_obj(marching_cubes([](const Vec3& x) { return x.norm() - 0.5; }, g), dir / "sphere.obj");
  write(dir / "cfg.json", R"({"schema_version": 1,
    "measurement": {"k": 3.141592653589793, "incident": 1, "observation": 40}})");
  REQUIRE(run("forward -c " + (dir / "cfg.json").string() + " --mesh " + (dir / "sphere.obj").string() + " -o " +
                  (dir / "bem.txt").string(),
              dir / "fwd.log") == 0);
  REQUIRE(run("mie --radius 0.5 --k 3.141592653589793 --incident 1 --observation 40 -o " + (dir / "mie.txt").string(),
              dir / "mie.log") == 0);
  const FarFieldData bem = read_far_field(dir / "bem.txt");
  const FarFieldData mie = read_far_field(dir / "mie.txt");
  REQUIRE(bem.config.same_measurements(mie.config));
  const double rel = (bem.values - mie.values).norm() / mie.values.norm();
  MESSAGE("forward vs mie relative error " << rel);
  CHECK(rel <= 0.02);
}

TEST_CASE("gradcheck reports a near-unit cosine") {
  const fs::path dir = work_dir("gradcheck");
  write(dir / "cfg.json", R"({"schema_version": 1,
    "measurement": {"k": 3.141592653589793, "incident": 1, "observation": 16},
    "grid": {"h": 0.1},
    "init": {"kind": "sphere", "radius": 0.35, "center": [0.05, -0.03, 0.04]},
    "target": {"kind": "sphere", "radius": 0.5, "refine": false}})");
  REQUIRE(run("gradcheck -c " + (dir / "cfg.json").string() + " --step 1e-3", dir / "gc.log") == 0);
  const std::string out = slurp(dir / "gc.log");
  const auto pos = out.find("cosine_similarity ");
  REQUIRE(pos != std::string::npos);
  const double cosine = std::stod(out.substr(pos + 18));
  CHECK(cosine >= 0.99);
}

TEST_CASE("exit codes follow the error class") {
  const fs::path dir = work_dir("exit");
  const auto log = dir / "log";
  CHECK(run("", log) != 0);
  CHECK(run("simulate", log) != 0);
  CHECK(run("reconstruct -c /nonexistent.json -d /nonexistent.txt", log) != 0);

  write(dir / "unknown.json", R"({"schema_version": 1, "measurment": {}})");
  CHECK(run("simulate -c " + (dir / "unknown.json").string() + " -o " + (dir / "x.txt").string(), log) == 2);
  CHECK(slurp(log).find("measurment") != std::string::npos);

  write(dir / "notarget.json", R"({"schema_version": 1})");
  CHECK(run("simulate -c " + (dir / "notarget.json").string() + " -o " + (dir / "x.txt").string(), log) == 2);

  // A data file whose measurements disagree with the config.
  REQUIRE(run("mie --radius 0.5 --incident 3 --observation 5 -o " + (dir / "mie.txt").string(), log) == 0);
  write(dir / "cfg.json", kSmallConfig);
  CHECK(run("reconstruct -c " + (dir / "cfg.json").string() + " -d " + (dir / "mie.txt").string() + " -o " +
                (dir / "run").string(),
            log) == 2);

  // No surface: the initial sphere lies outside the grid.
  write(dir / "away.json", R"({"schema_version": 1,
    "measurement": {"k": 3.141592653589793, "incident": 3, "observation": 5},
    "grid": {"h": 0.12},
    "init": {"kind": "sphere", "radius": 0.3, "center": [5.0, 0.0, 0.0]}})");
  CHECK(run("reconstruct -c " + (dir / "away.json").string() + " -d " + (dir / "mie.txt").string() + " -o " +
                (dir / "run2").string(),
            log) == 4);
  CHECK(slurp(log).find("iteration 0") != std::string::npos);

  // GMRES held to an unreachable tolerance within one iteration.
  write(dir / "solver.json", R"({"schema_version": 1,
    "measurement": {"k": 3.141592653589793, "incident": 3, "observation": 5},
    "grid": {"h": 0.12},
    "solver": {"gmres_tol": 1e-14, "gmres_max_iters": 1}})");
  CHECK(run("reconstruct -c " + (dir / "solver.json").string() + " -d " + (dir / "mie.txt").string() + " -o " +
                (dir / "run3").string(),
            log) == 3);
}
