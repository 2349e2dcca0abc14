#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "latscat/errors.hpp"
#include "latscat/mesh.hpp"
#include "latscat/mie.hpp"
#include "latscat/recon.hpp"

using namespace latscat;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("latscat_recon_" + name);
  fs::remove_all(p);
  return p;
}

// Coarse but complete run: sphere target r=0.45, init r=0.3, one incident wave.
RunConfig small_config() {
  RunConfig c;
  c.k = kPi;
  c.incident_count = 1;
  c.observation_count = 12;
  c.grid.h = 0.12;
  c.indicator_grid.h = 0.1;
  c.schedule.base = 0.02;
  c.stop.max_iters = 4;
  c.target.kind = "sphere";
  c.target.radius = 0.45;
  c.refine_target = false;
  return c;
}

FarFieldData sphere_data(const RunConfig& c) {
  FarFieldData d;
  d.config = c.measurement();
  d.values.resize(c.incident_count, c.observation_count);
  const SphereScatterer s{c.target.radius, Vec3::Zero()};
  for (int l = 0; l < c.incident_count; ++l) {
    for (int m = 0; m < c.observation_count; ++m) {
      d.values(l, m) = mie_far_field(s, c.k, d.config.incident[l], d.config.observation[m]);
    }
  }
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_same_records(const std::vector<IterationRecord>& a, const std::vector<IterationRecord>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].iteration == b[i].iteration);
    CHECK(a[i].loss == b[i].loss);
    CHECK(a[i].indicator_error == b[i].indicator_error);
    CHECK(a[i].gradient_norm == b[i].gradient_norm);
    CHECK(a[i].step_norm == b[i].step_norm);
    CHECK(a[i].learning_rate == b[i].learning_rate);
    CHECK(a[i].faces == b[i].faces);
    CHECK(a[i].solver_iterations == b[i].solver_iterations);
  }
}

}  // namespace

TEST_CASE("zero iterations evaluate the initial latent once") {
  RunConfig c = small_config();
  c.stop.max_iters = 0;
  const AnalyticFamily fam;
  const VecX z0 = fam.sphere(0.3);
  const fs::path dir = fresh_dir("zero");
  const ReconResult r = reconstruct(c, fam, sphere_data(c), z0, target_inside(c, fam), {dir});
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].iteration == 0);
  CHECK(r.records[0].step_norm == 0.0);
  CHECK(r.records[0].indicator_error > 0);
  CHECK((r.z - z0).norm() == 0.0);
  CHECK((read_latent_csv(dir / "latent_final.csv") - z0).norm() == 0.0);
  CHECK(fs::exists(dir / "meshes" / "iter_0000.obj"));
  CHECK_FALSE(fs::exists(dir / "run.lock"));
}

TEST_CASE("reconstruction lowers the loss and the running minimum never rises") {
  const RunConfig c = small_config();
  const AnalyticFamily fam;
  const ReconResult r = reconstruct(c, fam, sphere_data(c), fam.sphere(0.3), target_inside(c, fam));
  REQUIRE(r.records.size() == static_cast<std::size_t>(c.stop.max_iters + 1));
  double best = r.records[0].loss;
  for (const auto& rec : r.records) {
    const double next_best = std::min(best, rec.loss);
    CHECK(next_best <= best);
    best = next_best;
  }
  CHECK(best < 0.5 * r.records[0].loss);
  for (const auto& rec : r.records) CHECK(rec.indicator_error >= 0);
  for (std::size_t i = 0; i + 1 < r.records.size(); ++i) {
    CHECK(r.records[i].learning_rate == doctest::Approx(0.02));
    CHECK(r.records[i].step_norm > 0.0);
  }
  CHECK(r.mesh.face_count() == r.records.back().faces);
}

TEST_CASE("an interrupted and resumed run matches an uninterrupted one") {
  RunConfig c = small_config();
  c.mask_fraction = 0.5;  // exercises the saved generator state
  c.dump_gradients = true;
  const AnalyticFamily fam;
  const FarFieldData data = sphere_data(c);
  const VecX z0 = fam.sphere(0.3);

  const fs::path whole = fresh_dir("whole");
  const ReconResult a = reconstruct(c, fam, data, z0, target_inside(c, fam), {whole});

  const fs::path parts = fresh_dir("parts");
  ReconOptions first{parts};
  first.halt_after = 2;
  const ReconResult partial = reconstruct(c, fam, data, z0, target_inside(c, fam), first);
  CHECK(partial.records.size() == 2);
  CHECK_FALSE(fs::exists(parts / "latent_final.csv"));

  ReconOptions second{parts};
  second.resume = true;
  const ReconResult b = reconstruct(c, fam, data, z0, target_inside(c, fam), second);

  CHECK((a.z - b.z).norm() == 0.0);
  check_same_records(a.records, b.records);
  check_same_records(read_records_csv(whole / "records.csv"), read_records_csv(parts / "records.csv"));
  CHECK(slurp(whole / "latent_final.csv") == slurp(parts / "latent_final.csv"));
  CHECK(slurp(whole / "gradients.csv") == slurp(parts / "gradients.csv"));
  for (const auto& entry : fs::directory_iterator(whole / "meshes")) {
    CHECK(slurp(entry.path()) == slurp(parts / "meshes" / entry.path().filename()));
  }

  // Resuming a finished run changes nothing.
  const ReconResult again = reconstruct(c, fam, data, z0, target_inside(c, fam), second);
  CHECK((again.z - a.z).norm() == 0.0);
  check_same_records(again.records, a.records);
  CHECK(again.mesh.face_count() == a.mesh.face_count());
}

TEST_CASE("a locked run directory is refused") {
  const fs::path dir = fresh_dir("lock");
  const RunConfig c = small_config();
  const AnalyticFamily fam;
  {
    RunLock held(dir);
    CHECK(fs::exists(dir / "run.lock"));
    CHECK_THROWS_AS(RunLock{dir}, ConfigError);
    CHECK_THROWS_AS(reconstruct(c, fam, sphere_data(c), fam.sphere(0.3), {}, {dir}), ConfigError);
  }
  CHECK_FALSE(fs::exists(dir / "run.lock"));
  CHECK_NOTHROW(RunLock{dir});
}

TEST_CASE("meshes are kept on an eight-step cadence plus the ends") {
  CHECK(mesh_logged(0, 100, false));
  CHECK(mesh_logged(13, 100, false));
  CHECK(mesh_logged(26, 100, false));
  CHECK_FALSE(mesh_logged(12, 100, false));
  CHECK_FALSE(mesh_logged(14, 100, false));
  CHECK(mesh_logged(101, 100, true));
  CHECK(mesh_logged(57, 100, true));
  for (long n = 0; n <= 5; ++n) CHECK(mesh_logged(n, 5, false));
  CHECK(mesh_logged(2, 16, false));
  CHECK_FALSE(mesh_logged(3, 16, false));

  RunConfig c = small_config();
  c.stop.max_iters = 3;
  const AnalyticFamily fam;
  const fs::path dir = fresh_dir("meshes");
  const ReconResult r = reconstruct(c, fam, sphere_data(c), fam.sphere(0.3), {}, {dir});
  long count = 0;
  for (const auto& entry : fs::directory_iterator(dir / "meshes")) {
    const TriangleMesh m = read_obj(entry.path());
    CHECK_NOTHROW(m.check_closed());
    ++count;
  }
  CHECK(count == static_cast<long>(r.records.size()));
  const TriangleMesh last = read_obj(dir / "meshes" / "iter_0003.obj");
  CHECK(last.face_count() == r.mesh.face_count());
}

TEST_CASE("records and latent files round-trip exactly") {
  const fs::path dir = fresh_dir("csv");
  fs::create_directories(dir);
  std::vector<IterationRecord> recs(3);
  for (int i = 0; i < 3; ++i) {
    recs[i].iteration = i;
    recs[i].loss = std::exp(-1.0 - i) / 3.0;
    recs[i].indicator_error = i == 1 ? -1 : 17 * i;
    recs[i].gradient_norm = std::sqrt(2.0 + i);
    recs[i].step_norm = 1e-3 / 7.0;
    recs[i].learning_rate = 0.01 * std::pow(0.5, i);
    recs[i].faces = 1000 + i;
    recs[i].solver_iterations = 9 + i;
    recs[i].wall_seconds = 0.1 * i;
  }
  write_records_csv(dir / "r.csv", recs);
  const auto back = read_records_csv(dir / "r.csv");
  check_same_records(recs, back);
  for (int i = 0; i < 3; ++i) CHECK(back[i].wall_seconds == recs[i].wall_seconds);

  VecX z(5);
  z << 1.0 / 3.0, -2e-17, 123456.789, std::acos(-1.0), -0.0;
  write_latent_csv(dir / "z.csv", z);
  CHECK((read_latent_csv(dir / "z.csv") - z).norm() == 0.0);

  std::ofstream(dir / "bad.csv") << "index,value\n0,1.0\n2,3.0\n";
  CHECK_THROWS_AS(read_latent_csv(dir / "bad.csv"), IoError);
  std::ofstream(dir / "bad2.csv") << "something else\n";
  CHECK_THROWS_AS(read_latent_csv(dir / "bad2.csv"), IoError);
  CHECK_THROWS_AS(read_records_csv(dir / "bad2.csv"), IoError);
}

TEST_CASE("run configuration is strict and versioned") {
  const RunConfig defaults = parse_run_config(R"({"schema_version": 1})");
  CHECK(defaults.incident_count == 4);
  CHECK(defaults.observation_count == 100);
  CHECK(defaults.k == doctest::Approx(5.0 * kPi));
  CHECK(defaults.mode == DataMode::kFull);

  const RunConfig c = parse_run_config(R"({
    "schema_version": 1,
    "measurement": {"k": 15.707963267948966, "incident": 4, "observation": 100, "mode": "phaseless"},
    "optimizer": {"schedule": "decay", "learning_rate": 0.005, "period": 50, "mask_fraction": 0.5},
    "stop": {"max_iters": 30, "patience": 5, "rel_improve": 0.01},
    "grid": {"h": 0.1, "lower": [-0.8, -0.8, -0.8], "upper": [0.8, 0.8, 0.8]},
    "noise": {"delta": 0.4},
    "seeds": {"noise": 11, "mask": 12, "init": 13},
    "target": {"kind": "ellipsoid", "axes": [0.4, 0.5, 0.6]},
    "output": {"dir": "somewhere", "dump_gradients": true}
  })");
  CHECK(c.k == doctest::Approx(5.0 * kPi));
  CHECK(c.observation_count == 100);
  CHECK(c.mode == DataMode::kPhaseless);
  CHECK(c.schedule.kind == ScheduleKind::kStepDecay);
  CHECK(c.schedule.period == 50);
  CHECK(c.mask_fraction == 0.5);
  CHECK(c.stop.patience == 5);
  CHECK(c.grid.h == 0.1);
  CHECK(c.grid.lower.x() == -0.8);
  CHECK(c.noise_delta == 0.4);
  CHECK(c.seed_mask == 12);
  CHECK(c.target.axes.z() == 0.6);
  CHECK(c.output_dir == "somewhere");
  CHECK(c.dump_gradients);

  // Dumping and re-parsing is a fixed point.
  CHECK(dump_run_config(parse_run_config(dump_run_config(c))) == dump_run_config(c));

  CHECK_THROWS_AS(parse_run_config(R"({})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": 1, "extra": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": 1, "measurement": {"wavenumber": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": 1, "measurement": {"k": "fast"}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": 1, "measurement": {"mode": "sideways"}})"), UnknownKind);
  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": 1, "optimizer": {"mask_fraction": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": 1, "noise": {"delta": -0.1}})"), NegativeDelta);
  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": 1, "target": {"kind": "cube"}})"), UnknownKind);
  CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
}

TEST_CASE("module errors surface with the iteration index and leave a trace") {
  RunConfig c = small_config();
  const AnalyticFamily fam;
  const fs::path dir = fresh_dir("error");
  // A candidate centred outside the grid has no surface to extract.
  const VecX far_away = fam.sphere(0.3, Vec3(5.0, 0.0, 0.0));
  try {
    reconstruct(c, fam, sphere_data(c), far_away, {}, {dir});
    FAIL("expected a failure");
  } catch (const Error& e) {
    CHECK(e.error_class() == ErrorClass::kSurface);
    CHECK(std::string(e.what()).rfind("iteration 0:", 0) == 0);
  }
  CHECK(fs::exists(dir / "records.csv"));
  CHECK(read_records_csv(dir / "records.csv").empty());
  CHECK_FALSE(fs::exists(dir / "run.lock"));
}

TEST_CASE("the initial latent follows the config") {
  const AnalyticFamily fam;
  RunConfig c;
  CHECK((initial_latent(c, fam) - fam.sphere(0.3)).norm() == 0.0);
  c.init_kind = "sphere";
  c.init_radius = 0.4;
  c.init_center = Vec3(0.1, 0.0, 0.0);
  CHECK((initial_latent(c, fam) - fam.sphere(0.4, Vec3(0.1, 0.0, 0.0))).norm() == 0.0);
  c.init_kind = "explicit";
  c.init_values = {0, 0, 0, 0, 0, 0, 0};
  CHECK(initial_latent(c, fam).norm() == 0.0);
  c.init_values = {0, 0, 0};
  CHECK_THROWS(initial_latent(c, fam));
}
