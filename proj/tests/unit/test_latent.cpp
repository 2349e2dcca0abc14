#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "latscat/decoder.hpp"
#include "latscat/errors.hpp"
#include "latscat/quadrature.hpp"
#include "latscat/shapes.hpp"
#include "latscat/trainer.hpp"

using namespace latscat;

namespace {

std::filesystem::path temp_path(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

// Distance to an ellipsoid by dense parametric search plus local refinement.
double brute_distance(const Ellipsoid& e, const Vec3& x) {
  auto surf = [&](double th, double ph) {
    return Vec3(e.center[0] + e.axes[0] * std::sin(th) * std::cos(ph), e.center[1] + e.axes[1] * std::sin(th) * std::sin(ph),
                e.center[2] + e.axes[2] * std::cos(th));
  };
  double best = 1e300, bt = 0.0, bp = 0.0;
  const int nt = 200, np = 400;
  for (int i = 0; i <= nt; ++i) {
    for (int j = 0; j < np; ++j) {
      const double th = kPi * i / nt, ph = 2.0 * kPi * j / np;
      const double d = (surf(th, ph) - x).norm();
      if (d < best) {
        best = d;
        bt = th;
        bp = ph;
      }
    }
  }
  double step = kPi / nt;
  for (int it = 0; it < 60; ++it) {
    bool moved = false;
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        const double d = (surf(bt + di * step, bp + dj * step) - x).norm();
        if (d < best) {
          best = d;
          bt += di * step;
          bp += dj * step;
          moved = true;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return best;
}

// Straight-line forward pass used as a reference for the MLP decoder.
double reference_forward(const DecoderWeights& w, const VecX& z, const Vec3& x) {
  std::vector<double> h(z.data(), z.data() + z.size());
  h.push_back(x[0]);
  h.push_back(x[1]);
  h.push_back(x[2]);
  for (std::size_t l = 0; l < w.w.size(); ++l) {
    std::vector<double> next(static_cast<std::size_t>(w.w[l].rows()));
    for (Eigen::Index r = 0; r < w.w[l].rows(); ++r) {
      double a = w.b[l][r];
      for (Eigen::Index c = 0; c < w.w[l].cols(); ++c) a += w.w[l](r, c) * h[static_cast<std::size_t>(c)];
      if (l + 1 < w.w.size()) {
        a = w.activation == Activation::kTanh ? std::tanh(a) : std::log(1.0 + std::exp(w.beta * a)) / w.beta;
      }
      next[static_cast<std::size_t>(r)] = a;
    }
    h = next;
  }
  return h[0];
}

// Central differences of evaluate() in x and z with step `step`.
void fd_gradients(const Decoder& d, const VecX& z, const Vec3& x, double step, Vec3& gx, VecX& gz) {
  for (int i = 0; i < 3; ++i) {
    Vec3 xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    gx[i] = (d.evaluate(z, xp) - d.evaluate(z, xm)) / (2.0 * step);
  }
  gz.resize(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    VecX zp = z, zm = z;
    zp[i] += step;
    zm[i] -= step;
    gz[i] = (d.evaluate(zp, x) - d.evaluate(zm, x)) / (2.0 * step);
  }
}

double component_error(double got, double fd) { return std::abs(got - fd) / std::max(std::abs(fd), 1e-3); }

// One-sided distances in both directions between a mesh and an ellipsoid.
double hausdorff(const TriangleMesh& m, const Ellipsoid& e) {
  double worst = 0.0;
  for (const Vec3& v : m.vertices()) worst = std::max(worst, std::abs(e.sdf(v)));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int s = 0; s < 1500; ++s) {
    const Vec3 p = e.center + e.axes.cwiseProduct(Vec3(g(rng), g(rng), g(rng)).normalized());
    double best = 1e300;
    for (std::size_t f = 0; f < m.face_count(); ++f) {
      const int fi = static_cast<int>(f);
      best = std::min(best, (closest_point_on_triangle(p, m.vertex(fi, 0), m.vertex(fi, 1), m.vertex(fi, 2)) - p).norm());
    }
    worst = std::max(worst, best);
  }
  return worst;
}

// Decoder reporting a vanishing spatial gradient, to exercise the regularity check.
class FlatGradientSphere final : public Decoder {
 public:
  int latent_dim() const override { return 1; }
  std::string kind() const override { return "flat"; }

 protected:
  double value(const VecX&, const Vec3& x) const override { return x.norm() - 0.5; }
  double value_and_gradients(const VecX& z, const Vec3& x, Vec3& gx, VecX& gz) const override {
    gx.setZero();
    gz = VecX::Zero(1);
    return value(z, x);
  }
};

}  // namespace

TEST_CASE("exact ellipsoid distance agrees with a brute-force search") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Ellipsoid shapes[] = {{Vec3(0.1, -0.05, 0.0), Vec3(0.5, 0.4, 0.3)},
                              {Vec3::Zero(), Vec3(0.3, 0.6, 0.45)},
                              {Vec3(0.0, 0.0, 0.1), Vec3(0.5, 0.5, 0.25)}};
  for (const Ellipsoid& e : shapes) {
    for (int t = 0; t < 25; ++t) {
      const Vec3 x = (t < 12) ? Vec3(u(rng), u(rng), u(rng)) : e.center + 0.8 * e.axes.cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
      const double d = e.sdf(x);
      CHECK(std::abs(std::abs(d) - brute_distance(e, x)) <= 1e-7);
      CHECK((d < 0.0) == ((x - e.center).cwiseQuotient(e.axes).squaredNorm() < 1.0));
    }
    // Points on symmetry planes and axes take the degenerate branches.
    for (const Vec3& x : {Vec3(0.05, 0.0, 0.0), Vec3(0.0, 0.1, 0.0), Vec3(0.0, 0.0, -0.02), Vec3(0.7, 0.0, 0.0),
                          Vec3(0.0, 0.2, 0.1), Vec3(0.1, 0.0, 0.05), Vec3(0.1, 0.1, 0.0)}) {
      const Vec3 p = e.center + x;
      CHECK(std::abs(std::abs(e.sdf(p)) - brute_distance(e, p)) <= 1e-7);
    }
  }
}

TEST_CASE("sphere signed distance and sampling") {
  const Ellipsoid s = Ellipsoid::sphere(0.5);
  CHECK(s.sdf(Vec3(1, 1, 1)) == doctest::Approx(std::sqrt(3.0) - 0.5).epsilon(1e-14));
  CHECK(s.sdf(Vec3(-1, 1, -1)) == doctest::Approx(std::sqrt(3.0) - 0.5).epsilon(1e-14));
  CHECK(s.sdf(Vec3::Zero()) == doctest::Approx(-0.5));

  const SdfSampleSet on = sample_sdf(s, {500, 1.0, 0.0, 3});
  for (double v : on.sdf) CHECK(std::abs(v) <= 1e-14);

  const Ellipsoid e{Vec3::Zero(), Vec3(0.8, 0.7, 0.6)};
  const SdfSampleSet uni = sample_sdf(e, {100000, 0.0, 0.02, 4});
  std::size_t inside = 0;
  for (std::size_t i = 0; i < uni.size(); ++i) {
    REQUIRE(uni.points[i].cwiseAbs().maxCoeff() <= 1.0);
    inside += uni.sdf[i] < 0.0;
  }
  const double frac = static_cast<double>(inside) / static_cast<double>(uni.size());
  MESSAGE("inside fraction " << frac << " vs " << e.volume() / 8.0);
  CHECK(std::abs(frac - e.volume() / 8.0) <= 0.02 * e.volume() / 8.0);

  const SdfSampleSet near = sample_sdf(e, {2000, 1.0, 0.02, 8});
  double rms = 0.0;
  for (double v : near.sdf) rms += v * v;
  CHECK(std::sqrt(rms / 2000.0) < 0.03);
  CHECK_THROWS_AS(sample_sdf(e, {0, 0.5, 0.02, 1}), ConfigError);
}

TEST_CASE("sample files and dataset directories round trip") {
  const SdfSampleSet a = sample_sdf(Ellipsoid::sphere(0.4), {300, 0.5, 0.02, 1});
  const SdfSampleSet b = sample_sdf(Ellipsoid::sphere(0.3), {200, 0.5, 0.02, 2});
  const auto dir = temp_path("latscat_dataset_test");
  std::filesystem::remove_all(dir);
  write_dataset(dir, {a, b});
  const auto back = read_dataset(dir);
  REQUIRE(back.size() == 2);
  CHECK(back[0].points == a.points);
  CHECK(back[0].sdf == a.sdf);
  CHECK(back[1].sdf == b.sdf);
  {
    std::ofstream os(dir / "shape_002.bin", std::ios::binary);
    os << "garbage";
  }
  CHECK_THROWS_AS(read_dataset(dir), IoError);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_dataset(dir), IoError);
}

TEST_CASE("analytic family encodes spheres exactly") {
  const AnalyticFamily fam;
  const VecX z = fam.sphere(0.5);
  CHECK(std::abs(fam.evaluate(z, Vec3(0.5, 0, 0))) <= 1e-14);
  CHECK(fam.evaluate(z, Vec3(1, 0, 0)) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK((fam.grad_x(z, Vec3(1, 0, 0)) - Vec3(1, 0, 0)).norm() <= 1e-13);

  const auto p = fam.params(fam.encode(Vec3(0.1, -0.2, 0.05), Vec3(0.3, 0.45, 0.7), 3.5));
  CHECK((p.center - Vec3(0.1, -0.2, 0.05)).norm() <= 1e-15);
  CHECK((p.axes - Vec3(0.3, 0.45, 0.7)).norm() <= 1e-14);
  CHECK(p.exponent == doctest::Approx(3.5).epsilon(1e-14));

  // The exponent code is scaled by the rate: e = 1 + exp(rate * t).
  VecX t = fam.sphere(0.4);
  t[6] = 2.0;
  CHECK(fam.params(t).exponent == doctest::Approx(1.0 + std::exp(2.0 * fam.exponent_rate())).epsilon(1e-14));
  const AnalyticFamily fast(0.15, 0.8, 1.0);
  CHECK(fast.params(t).exponent == doctest::Approx(1.0 + std::exp(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(AnalyticFamily(0.15, 0.8, 0.0), ConfigError);

  // Eikonal property and exact distance for off-centre spheres.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 c(0.1, 0.05, -0.1);
  const VecX zc = fam.sphere(0.35, c);
  for (int t = 0; t < 50; ++t) {
    const Vec3 x(u(rng), u(rng), u(rng));
    CHECK(fam.grad_x(zc, x).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fam.evaluate(zc, x) == doctest::Approx((x - c).norm() - 0.35).epsilon(1e-12));
  }
  CHECK_THROWS_AS(fam.encode(Vec3::Zero(), Vec3(0.1, 0.5, 0.5)), ConfigError);
  CHECK_THROWS_AS(fam.encode(Vec3::Zero(), Vec3(0.5, 0.5, 0.5), 1.0), ConfigError);
  CHECK_THROWS_AS(fam.evaluate(VecX::Zero(6), Vec3::Zero()), DimensionMismatch);
  CHECK_THROWS_AS(fam.grad_z(VecX::Zero(8), Vec3::Zero()), DimensionMismatch);
}

TEST_CASE("analytic family gradients match finite differences") {
  const AnalyticFamily fam;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int checked = 0;
  while (checked < 100) {
    VecX z(7);
    for (int i = 0; i < 3; ++i) z[i] = 0.2 * u(rng);
    for (int i = 3; i < 6; ++i) z[i] = u(rng);
    z[6] = 0.75 * u(rng) + 0.25;
    const Vec3 x(u(rng), u(rng), u(rng));
    // Keep away from the coordinate planes through the centre, where
    // |t|^e has unbounded second derivatives for e < 2.
    if ((x - z.head<3>()).cwiseAbs().minCoeff() < 0.05) continue;
    Vec3 gx, fx;
    VecX gz, fz;
    fam.evaluate_with_gradients(z, x, gx, gz);
    fd_gradients(fam, z, x, 1e-5, fx, fz);
    for (int i = 0; i < 3; ++i) worst = std::max(worst, component_error(gx[i], fx[i]));
    for (int i = 0; i < 7; ++i) worst = std::max(worst, component_error(gz[i], fz[i]));
    ++checked;
  }
  MESSAGE("worst relative gradient error " << worst);
  CHECK(worst <= 1e-6);
}

TEST_CASE("MLP decoder matches a reference forward pass and its own finite differences") {
  for (Activation act : {Activation::kSoftplus, Activation::kTanh}) {
    const DecoderWeights w = random_weights(8, {32, 32, 32, 32}, act, 10.0, 77);
    const MlpDecoder dec(w);
    CHECK(dec.latent_dim() == 8);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_val = 0.0, worst_grad = 0.0;
    std::vector<Vec3> xs;
    VecX z0(8);
    for (int i = 0; i < 8; ++i) z0[i] = g(rng);
    for (int t = 0; t < 100; ++t) {
      VecX z(8);
      for (int i = 0; i < 8; ++i) z[i] = g(rng);
      const Vec3 x(u(rng), u(rng), u(rng));
      xs.push_back(x);
      worst_val = std::max(worst_val, std::abs(dec.evaluate(z, x) - reference_forward(w, z, x)));
      Vec3 gx, fx;
      VecX gz, fz;
      dec.evaluate_with_gradients(z, x, gx, gz);
      fd_gradients(dec, z, x, 1e-5, fx, fz);
      for (int i = 0; i < 3; ++i) worst_grad = std::max(worst_grad, component_error(gx[i], fx[i]));
      for (int i = 0; i < 8; ++i) worst_grad = std::max(worst_grad, component_error(gz[i], fz[i]));
    }
    MESSAGE("activation " << static_cast<int>(act) << ": value gap " << worst_val << ", gradient error " << worst_grad);
    CHECK(worst_val <= 1e-12);
    CHECK(worst_grad <= 1e-5);
    const auto batch = dec.evaluate_many(z0, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(batch[i] - dec.evaluate(z0, xs[i])) <= 1e-12);
  }
}

TEST_CASE("MLP with a zero output layer has zero latent gradient") {
  DecoderWeights w = random_weights(4, {16, 16}, Activation::kSoftplus, 10.0, 1);
  w.w.back().setZero();
  const MlpDecoder dec(w);
  const VecX gz = dec.grad_z(VecX::Constant(4, 0.3), Vec3(0.1, 0.2, 0.3));
  CHECK(gz.isZero(0.0));
}

TEST_CASE("decoder weights and codes round trip through files") {
  const DecoderWeights w = random_weights(8, {128, 128, 128, 128}, Activation::kSoftplus, 10.0, 3);
  const auto path = temp_path("latscat_weights_test.bin");
  write_weights(path, w);
  const DecoderWeights r = read_weights(path);
  REQUIRE(r.w.size() == w.w.size());
  for (std::size_t l = 0; l < w.w.size(); ++l) {
    CHECK(r.w[l] == w.w[l]);
    CHECK(r.b[l] == w.b[l]);
  }
  CHECK(r.latent_dim == 8);
  CHECK(r.beta == 10.0);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  CHECK_THROWS_AS(read_weights(path), IoError);
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE";
  }
  CHECK_THROWS_AS(read_weights(path), IoError);
  std::filesystem::remove(path);

  const std::vector<VecX> codes{VecX::Constant(3, 0.1), (VecX(3) << -1e-300, 2.5, 1.0 / 3.0).finished()};
  const auto cpath = temp_path("latscat_codes_test.csv");
  write_codes(cpath, codes);
  const auto back = read_codes(cpath);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == codes[0]);
  CHECK(back[1] == codes[1]);
  {
    std::ofstream os(cpath);
    os << "1,2,3\n4,5\n";
  }
  CHECK_THROWS_AS(read_codes(cpath), IoError);
  std::filesystem::remove(cpath);

  DecoderWeights bad = w;
  bad.w[1] = Eigen::MatrixXd::Zero(5, 5);
  CHECK_THROWS_AS(MlpDecoder{bad}, ConfigError);
}

TEST_CASE("surface extraction from the analytic family") {
  const AnalyticFamily fam;
  GridSpec g;
  const TriangleMesh m = extract_surface(fam, fam.sphere(0.5), g);
  CHECK(m.is_closed_oriented());
  CHECK(m.total_area() == doctest::Approx(kPi).epsilon(0.03));
  for (const Vec3& v : m.vertices()) CHECK(std::abs(fam.evaluate(fam.sphere(0.5), v)) <= g.h);

  const VecX box = fam.encode(Vec3(0.05, 0.0, -0.1), Vec3(0.4, 0.3, 0.5), 4.0);
  const TriangleMesh sq = extract_surface(fam, box, g);
  CHECK(sq.is_closed_oriented());
  for (const Vec3& v : sq.vertices()) CHECK(std::abs(fam.evaluate(box, v)) <= g.h);

  CHECK_THROWS_AS(extract_surface(fam, fam.sphere(0.5, Vec3(5, 5, 5)), g), NoSurface);
  CHECK_THROWS_AS(extract_surface(fam, fam.sphere(0.5), g, 2.0), IrregularSurface);
  const FlatGradientSphere flat;
  CHECK_THROWS_AS(extract_surface(flat, VecX::Zero(1), g), IrregularSurface);
}

TEST_CASE("trainer fits a single sphere") {
  const Ellipsoid s = Ellipsoid::sphere(0.5);
  TrainOptions opt;
  opt.latent_dim = 8;
  opt.epochs = 150;
  const auto t = train_decoder({sample_sdf(s, {2000, 0.5, 0.02, 1})}, opt);
  const MlpDecoder dec(t.weights);
  const double err = mean_abs_sdf_error(dec, t.codes[0], sample_sdf(s, {4000, 0.5, 0.02, 99}));
  MESSAGE("held-out mean l1 error " << err);
  CHECK(err <= 0.02);
  // Ten-epoch averages of the training loss never increase.
  std::vector<double> avg;
  for (std::size_t e = 0; e + 10 <= t.epoch_loss.size(); e += 10) {
    double a = 0.0;
    for (std::size_t k = e; k < e + 10; ++k) a += t.epoch_loss[k];
    avg.push_back(a / 10.0);
  }
  for (std::size_t i = 1; i < avg.size(); ++i) CHECK(avg[i] <= avg[i - 1] * 1.05);
  CHECK(avg.back() < 0.5 * avg.front());
}

TEST_CASE("a dominant code penalty drives the codes to zero") {
  TrainOptions opt;
  opt.latent_dim = 8;
  opt.epochs = 20;
  opt.lambda = 1e6;
  const auto t = train_decoder({sample_sdf(Ellipsoid::sphere(0.4), {1000, 0.5, 0.02, 1}),
                                sample_sdf(Ellipsoid::sphere(0.6), {1000, 0.5, 0.02, 2})},
                               opt);
  for (const VecX& c : t.codes) CHECK(c.norm() <= 1e-2);
}

TEST_CASE("trained ellipsoid decoder reproduces its shapes and interpolates") {
  const std::vector<Ellipsoid> shapes{{Vec3::Zero(), Vec3(0.5, 0.35, 0.3)},
                                      {Vec3::Zero(), Vec3(0.3, 0.55, 0.4)},
                                      {Vec3::Zero(), Vec3(0.4, 0.4, 0.55)},
                                      {Vec3::Zero(), Vec3(0.6, 0.45, 0.35)}};
  std::vector<SdfSampleSet> data;
  for (std::size_t i = 0; i < shapes.size(); ++i) data.push_back(sample_sdf(shapes[i], {3000, 0.5, 0.02, 10 + i}));
  TrainOptions opt;
  opt.latent_dim = 8;
  opt.epochs = 120;
  const auto t = train_decoder(data, opt);
  const MlpDecoder dec(t.weights);
  GridSpec g;
  const TriangleMesh m0 = extract_surface(dec, t.codes[0], g);
  const double h0 = hausdorff(m0, shapes[0]);
  MESSAGE("Hausdorff distance to the first training shape " << h0);
  CHECK(h0 <= 2.0 * g.h);
  const TriangleMesh mid = extract_surface(dec, 0.5 * (t.codes[1] + t.codes[3]), g);
  CHECK(mid.is_closed_oriented());
  CHECK(mesh_volume(mid) > 0.0);
  CHECK_THROWS_AS(train_decoder({}, opt), EmptyDataset);
  CHECK_THROWS_AS(train_decoder({SdfSampleSet{}}, opt), EmptyDataset);
}
