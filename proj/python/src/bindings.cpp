#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "latscat/bem.hpp"
#include "latscat/decoder.hpp"
#include "latscat/errors.hpp"
#include "latscat/gradient.hpp"
#include "latscat/marching_cubes.hpp"
#include "latscat/measurement.hpp"
#include "latscat/mie.hpp"
#include "latscat/optimizer.hpp"
#include "latscat/recon.hpp"

namespace py = pybind11;
using namespace latscat;

namespace {

using RowMat3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using RowFaces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

RowMat3 to_rows(const std::vector<Vec3>& v) {
  RowMat3 out(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return out;
}

std::vector<Vec3> from_rows(const RowMat3& m) {
  std::vector<Vec3> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).transpose());
  return out;
}

TriangleMesh mesh_from_arrays(const RowMat3& vertices, const RowFaces& faces) {
  std::vector<Face> f;
  for (Eigen::Index i = 0; i < faces.rows(); ++i) f.push_back({faces(i, 0), faces(i, 1), faces(i, 2)});
  return TriangleMesh(from_rows(vertices), std::move(f));
}

py::tuple mesh_arrays(const TriangleMesh& m) {
  RowFaces f(static_cast<Eigen::Index>(m.face_count()), 3);
  for (std::size_t i = 0; i < m.face_count(); ++i) {
    for (int c = 0; c < 3; ++c) f(static_cast<Eigen::Index>(i), c) = m.faces()[i][c];
  }
  return py::make_tuple(to_rows(m.vertices()), f);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Inverse obstacle scattering with latent shape codes";

  auto base = py::register_exception<Error>(m, "LatscatError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NoConvergence>(m, "NoConvergence", base.ptr());
  py::register_exception<NoSurface>(m, "NoSurface", base.ptr());
  py::register_exception<IrregularSurface>(m, "IrregularSurface", base.ptr());
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());
  py::register_exception<NonPositiveN>(m, "NonPositiveN", base.ptr());
  py::register_exception<NegativeDelta>(m, "NegativeDelta", base.ptr());
  py::register_exception<ConfigMismatch>(m, "ConfigMismatch", base.ptr());
  py::register_exception<NonPositiveEpsilon>(m, "NonPositiveEpsilon", base.ptr());
  py::register_exception<UnknownKind>(m, "UnknownKind", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def("fibonacci_directions", [](int n) { return to_rows(fibonacci_directions(n)); }, py::arg("n"),
        "N x 3 array of Fibonacci-lattice unit vectors.");

  m.def(
      "mie_far_field",
      [](double radius, double k, const Vec3& d, const RowMat3& xhat, const Vec3& center) {
        CVecX out(xhat.rows());
        for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
          out[i] = mie_far_field(SphereScatterer{radius, center}, k, d, xhat.row(i).transpose());
        }
        return out;
      },
      py::arg("radius"), py::arg("k"), py::arg("d"), py::arg("xhat"), py::arg("center") = Vec3::Zero(),
      "Exact far field of a sound-soft sphere at each row of xhat.");

  m.def(
      "sphere_surface",
      [](double radius, double h) {
        GridSpec g;
        g.h = h;
        return mesh_arrays(marching_cubes([radius](const Vec3& x) { return x.norm() - radius; }, g));
      },
      py::arg("radius"), py::arg("h") = 0.06, "Marching-cubes mesh (vertices, faces) of a centred sphere.");

  m.def(
      "far_field",
      [](const RowMat3& vertices, const RowFaces& faces, double k, const RowMat3& incident, const RowMat3& observed,
         double tol) {
        const TriangleMesh mesh = mesh_from_arrays(vertices, faces);
        mesh.check_closed();
        MeasurementConfig cfg;
        cfg.k = k;
        cfg.incident = from_rows(incident);
        cfg.observation = from_rows(observed);
        SimulationOptions opt;
        opt.gmres.tol = tol;
        py::gil_scoped_release release;
        return simulate_data(mesh, cfg, opt).values;
      },
      py::arg("vertices"), py::arg("faces"), py::arg("k"), py::arg("incident"), py::arg("observed"),
      py::arg("tol") = 1e-5, "Complex L x M far field of a sound-soft mesh obstacle.");

  m.def("loss", [](const CMatX& sim, const CMatX& obs) {
    if (sim.rows() != obs.rows() || sim.cols() != obs.cols()) throw DimensionMismatch("shape mismatch");
    return (sim - obs).squaredNorm() / (2.0 * static_cast<double>(sim.size()));
  }, py::arg("sim"), py::arg("obs"), "(1/2LM) sum |sim - obs|^2.");
  m.def("phaseless_loss", &phaseless_loss, py::arg("sim"), py::arg("obs"), py::arg("eps"));

  py::class_<AdamState>(m, "AdamState")
      .def(py::init([](Eigen::Index dim, double b1, double b2, double eps) { return AdamState::fresh(dim, b1, b2, eps); }),
           py::arg("dim"), py::arg("beta1") = 0.9, py::arg("beta2") = 0.999, py::arg("eps_den") = 1e-8)
      .def_readonly("m", &AdamState::m)
      .def_readonly("v", &AdamState::v)
      .def_readonly("step", &AdamState::step)
      .def_readonly("beta1", &AdamState::beta1)
      .def_readonly("beta2", &AdamState::beta2)
      .def_readonly("eps_den", &AdamState::eps_den);
  m.def(
      "adam_step",
      [](const AdamState& s, const VecX& z, const VecX& g, double alpha) {
        AdamResult r = adam_step(s, z, g, alpha);
        return py::make_tuple(r.state, r.z);
      },
      py::arg("state"), py::arg("z"), py::arg("g"), py::arg("alpha"), "Returns (new_state, new_z).");
  m.def("schedule", &schedule, py::arg("kind"), py::arg("n"));

  py::class_<AnalyticFamily>(m, "AnalyticFamily")
      .def(py::init<double, double, double>(), py::arg("a_min") = 0.15, py::arg("a_max") = 0.8,
           py::arg("exponent_rate") = 0.25)
      .def_property_readonly("latent_dim", &AnalyticFamily::latent_dim)
      .def("sphere", &AnalyticFamily::sphere, py::arg("radius"), py::arg("center") = Vec3::Zero())
      .def("encode", &AnalyticFamily::encode, py::arg("center"), py::arg("axes"), py::arg("exponent") = 2.0)
      .def("evaluate", [](const AnalyticFamily& f, const VecX& z, const Vec3& x) { return f.evaluate(z, x); },
           py::arg("z"), py::arg("x"))
      .def("grad_z", [](const AnalyticFamily& f, const VecX& z, const Vec3& x) { return f.grad_z(z, x); },
           py::arg("z"), py::arg("x"))
      .def(
          "surface",
          [](const AnalyticFamily& f, const VecX& z, double h) {
            GridSpec g;
            g.h = h;
            return mesh_arrays(extract_surface(f, z, g));
          },
          py::arg("z"), py::arg("h") = 0.06);

  m.def(
      "analytic_loss_and_gradient",
      [](const VecX& z, double k, const RowMat3& incident, const RowMat3& observed, const CMatX& data,
         const std::string& mode, double eps, double h) {
        const AnalyticFamily fam;
        FarFieldData obs;
        obs.config.k = k;
        obs.config.mode = parse_mode(mode);
        obs.config.incident = from_rows(incident);
        if (obs.config.mode != DataMode::kBackscatter) obs.config.observation = from_rows(observed);
        obs.config.phaseless_eps = eps;
        obs.values = data;
        ObjectiveOptions opt;
        opt.grid.h = h;
        const LatentObjective obj(fam, obs, opt);
        py::gil_scoped_release release;
        const Evaluation ev = obj.evaluate(z);
        return std::make_pair(ev.loss, ev.gradient);
      },
      py::arg("z"), py::arg("k"), py::arg("incident"), py::arg("observed"), py::arg("data"),
      py::arg("mode") = "full", py::arg("eps") = 0.0, py::arg("h") = 0.06,
      "Loss and latent gradient of the analytic family against the given data.");

  m.def(
      "indicator_error_spheres",
      [](double r1, double r2, double h) {
        GridSpec g;
        g.h = h;
        return indicator_error([r1](const Vec3& x) { return x.norm() <= r1; },
                               [r2](const Vec3& x) { return x.norm() <= r2; }, g);
      },
      py::arg("r1"), py::arg("r2"), py::arg("h") = 0.05);

  m.def(
      "parse_run_config", [](const std::string& text) { return dump_run_config(parse_run_config(text)); },
      py::arg("text"), "Validates a run configuration and returns it with all defaults filled in.");

  m.def(
      "reconstruct",
      [](const std::string& config_text, const std::filesystem::path& data_path, const std::filesystem::path& run_dir) {
        const RunConfig cfg = parse_run_config(config_text);
        const auto decoder = make_decoder(cfg);
        const FarFieldData data = read_far_field(data_path);
        ReconOptions opt;
        opt.run_dir = run_dir;
        ReconResult r;
        {
          py::gil_scoped_release release;
          r = reconstruct(cfg, *decoder, data, initial_latent(cfg, *decoder), target_inside(cfg, *decoder), opt);
        }
        std::vector<double> losses;
        std::vector<long> indicator;
        for (const auto& rec : r.records) {
          losses.push_back(rec.loss);
          indicator.push_back(rec.indicator_error);
        }
        return py::make_tuple(r.z, losses, indicator);
      },
      py::arg("config"), py::arg("data"), py::arg("run_dir") = std::filesystem::path(),
      "Runs a reconstruction; returns (final z, losses, indicator errors).");

  m.def(
      "simulate",
      [](const std::string& config_text, const std::filesystem::path& out) {
        const RunConfig cfg = parse_run_config(config_text);
        const auto decoder = make_decoder(cfg);
        py::gil_scoped_release release;
        write_far_field(out, simulate_target(cfg, *decoder));
      },
      py::arg("config"), py::arg("out"), "Simulates the configured target and writes a data file.");

  m.def(
      "read_far_field",
      [](const std::filesystem::path& p) {
        const FarFieldData d = read_far_field(p);
        return py::dict(py::arg("k") = d.config.k, py::arg("mode") = to_string(d.config.mode),
                        py::arg("incident") = to_rows(d.config.incident),
                        py::arg("observation") = to_rows(d.config.observation), py::arg("values") = d.values,
                        py::arg("delta") = d.delta, py::arg("seed") = d.noise_seed,
                        py::arg("eps") = d.config.phaseless_eps);
      },
      py::arg("path"));
}
