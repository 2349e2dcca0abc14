#include "latscat/decoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "latscat/errors.hpp"
#include "latscat/marching_cubes.hpp"

namespace latscat {

// ---------------------------------------------------------------------------
// Decoder

void Decoder::check(const VecX& z) const {
  if (z.size() != latent_dim()) {
    throw DimensionMismatch("decoder expects a latent vector of length " + std::to_string(latent_dim()) + ", got " +
                            std::to_string(z.size()));
  }
}

double Decoder::evaluate(const VecX& z, const Vec3& x) const {
  check(z);
  return value(z, x);
}

Vec3 Decoder::grad_x(const VecX& z, const Vec3& x) const {
  Vec3 gx;
  VecX gz;
  evaluate_with_gradients(z, x, gx, gz);
  return gx;
}

VecX Decoder::grad_z(const VecX& z, const Vec3& x) const {
  Vec3 gx;
  VecX gz;
  evaluate_with_gradients(z, x, gx, gz);
  return gz;
}

double Decoder::evaluate_with_gradients(const VecX& z, const Vec3& x, Vec3& gx, VecX& gz) const {
  check(z);
  gz.resize(z.size());
  return value_and_gradients(z, x, gx, gz);
}

std::vector<double> Decoder::evaluate_many(const VecX& z, const std::vector<Vec3>& xs) const {
  check(z);
  std::vector<double> out(xs.size());
  values(z, xs, out.data());
  return out;
}

void Decoder::values(const VecX& z, const std::vector<Vec3>& xs, double* out) const {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(xs.size()); ++i) out[i] = value(z, xs[i]);
}

// ---------------------------------------------------------------------------
// Analytic family

namespace {

// Forward-mode dual number carrying N partial derivatives.
template <int N>
struct Dual {
  double v = 0.0;
  Eigen::Matrix<double, N, 1> d = Eigen::Matrix<double, N, 1>::Zero();

  static Dual variable(double value, int index) {
    Dual r;
    r.v = value;
    r.d[index] = 1.0;
    return r;
  }
  static Dual constant(double value) {
    Dual r;
    r.v = value;
    return r;
  }
};

template <int N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) {
  a.v += b.v;
  a.d += b.d;
  return a;
}
template <int N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) {
  a.v -= b.v;
  a.d -= b.d;
  return a;
}
template <int N>
Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r;
  r.v = a.v * b.v;
  r.d = a.d * b.v + b.d * a.v;
  return r;
}
template <int N>
Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r;
  r.v = a.v / b.v;
  r.d = (a.d - r.v * b.d) / b.v;
  return r;
}
template <int N>
Dual<N> operator*(double s, Dual<N> a) {
  a.v *= s;
  a.d *= s;
  return a;
}
template <int N>
Dual<N> exp(const Dual<N>& a) {
  Dual<N> r;
  r.v = std::exp(a.v);
  r.d = r.v * a.d;
  return r;
}
template <int N>
Dual<N> log(const Dual<N>& a) {
  Dual<N> r;
  r.v = std::log(a.v);
  r.d = a.d / a.v;
  return r;
}
template <int N>
Dual<N> abs(const Dual<N>& a) {
  return a.v < 0.0 ? -1.0 * a : a;
}

inline double exp(double a) { return std::exp(a); }
inline double log(double a) { return std::log(a); }
inline double abs(double a) { return std::abs(a); }

template <class T>
T lift(double v) {
  if constexpr (std::is_same_v<T, double>) {
    return v;
  } else {
    return T::constant(v);
  }
}

template <class T>
double value_of(const T& t) {
  if constexpr (std::is_same_v<T, double>) {
    return t;
  } else {
    return t.v;
  }
}

// u^e for u >= 0, with the limit 0 at u = 0 (e > 1).
template <class T>
T power(const T& u, const T& e) {
  if (value_of(u) <= 0.0) return lift<T>(0.0);
  return exp(e * log(u));
}

template <class T>
T family_sdf(const T* z, const T* x, double a_min, double a_max, double rate) {
  T a[3];
  for (int i = 0; i < 3; ++i) {
    a[i] = lift<T>(a_min) + (a_max - a_min) * (lift<T>(1.0) / (lift<T>(1.0) + exp(lift<T>(0.0) - z[3 + i])));
  }
  const T e = lift<T>(1.0) + exp(rate * z[6]);
  T s = lift<T>(0.0);
  for (int i = 0; i < 3; ++i) s = s + power(abs(x[i] - z[i]) / a[i], e);
  const T q = power(s, lift<T>(1.0) / e);
  const T g = exp((1.0 / 3.0) * (log(a[0]) + log(a[1]) + log(a[2])));
  return g * (q - lift<T>(1.0));
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

AnalyticFamily::AnalyticFamily(double a_min, double a_max, double exponent_rate)
    : a_min_(a_min), a_max_(a_max), rate_(exponent_rate) {
  if (!(a_min > 0.0 && a_max > a_min)) throw ConfigError("analytic family: need 0 < a_min < a_max");
  if (!(exponent_rate > 0.0)) throw ConfigError("analytic family: exponent rate must be positive");
}

AnalyticFamily::Params AnalyticFamily::params(const VecX& z) const {
  if (z.size() != kLatentDim) throw DimensionMismatch("analytic family expects 7 latent entries");
  Params p;
  p.center = z.head<3>();
  for (int i = 0; i < 3; ++i) p.axes[i] = a_min_ + (a_max_ - a_min_) * sigmoid(z[3 + i]);
  p.exponent = 1.0 + std::exp(rate_ * z[6]);
  return p;
}

VecX AnalyticFamily::encode(const Vec3& center, const Vec3& axes, double exponent) const {
  VecX z(kLatentDim);
  z.head<3>() = center;
  for (int i = 0; i < 3; ++i) {
    if (!(axes[i] > a_min_ && axes[i] < a_max_)) throw ConfigError("analytic family: semi-axis outside (a_min, a_max)");
    const double p = (axes[i] - a_min_) / (a_max_ - a_min_);
    z[3 + i] = std::log(p / (1.0 - p));
  }
  if (!(exponent > 1.0)) throw ConfigError("analytic family: exponent must exceed 1");
  z[6] = std::log(exponent - 1.0) / rate_;
  return z;
}

VecX AnalyticFamily::sphere(double radius, const Vec3& center) const {
  return encode(center, Vec3::Constant(radius), 2.0);
}

double AnalyticFamily::value(const VecX& z, const Vec3& x) const {
  const double zz[7] = {z[0], z[1], z[2], z[3], z[4], z[5], z[6]};
  const double xx[3] = {x[0], x[1], x[2]};
  return family_sdf(zz, xx, a_min_, a_max_, rate_);
}

double AnalyticFamily::value_and_gradients(const VecX& z, const Vec3& x, Vec3& gx, VecX& gz) const {
  using D = Dual<10>;
  D xx[3], zz[7];
  for (int i = 0; i < 3; ++i) xx[i] = D::variable(x[i], i);
  for (int i = 0; i < 7; ++i) zz[i] = D::variable(z[i], 3 + i);
  const D f = family_sdf(zz, xx, a_min_, a_max_, rate_);
  gx = f.d.head<3>();
  gz = f.d.tail<7>();
  return f.v;
}

// ---------------------------------------------------------------------------
// MLP weights

void DecoderWeights::validate() const {
  if (latent_dim < 0) throw ConfigError("decoder weights: negative latent dimension");
  if (w.empty() || w.size() != b.size()) throw ConfigError("decoder weights: need matching weight and bias lists");
  if (activation != Activation::kSoftplus && activation != Activation::kTanh) {
    throw ConfigError("decoder weights: unknown activation id");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("decoder weights: softplus beta must be positive");
  Eigen::Index in = latent_dim + 3;
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (w[l].cols() != in || w[l].rows() != b[l].size() || w[l].rows() == 0) {
      throw ConfigError("decoder weights: layer " + std::to_string(l) + " breaks the dimension chain");
    }
    if (!w[l].allFinite() || !b[l].allFinite()) throw ConfigError("decoder weights: non-finite parameter");
    in = w[l].rows();
  }
  if (in != 1) throw ConfigError("decoder weights: output layer must have width 1");
}

std::size_t DecoderWeights::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < w.size(); ++l) n += static_cast<std::size_t>(w[l].size() + b[l].size());
  return n;
}

DecoderWeights random_weights(int latent_dim, const std::vector<int>& hidden, Activation act, double beta,
                              std::uint64_t seed) {
  DecoderWeights dw;
  dw.latent_dim = latent_dim;
  dw.activation = act;
  dw.beta = beta;
  std::mt19937_64 rng(seed);
  int in = latent_dim + 3;
  std::vector<int> widths = hidden;
  widths.push_back(1);
  for (int out : widths) {
    if (out <= 0) throw ConfigError("decoder: layer widths must be positive");
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(in), 1.0 / std::sqrt(in));
    Eigen::MatrixXd w(out, in);
    VecX b(out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
    dw.w.push_back(std::move(w));
    dw.b.push_back(std::move(b));
    in = out;
  }
  dw.validate();
  return dw;
}

namespace {

constexpr char kMagic[4] = {'L', 'S', 'D', 'W'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw IoError("truncated weights file while reading " + what);
  return v;
}

}  // namespace

void write_weights(const std::filesystem::path& path, const DecoderWeights& w) {
  static_assert(std::endian::native == std::endian::little);
  w.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, static_cast<std::uint32_t>(w.latent_dim));
  put(os, static_cast<std::uint32_t>(w.w.size()));
  put(os, static_cast<std::uint32_t>(w.activation));
  put(os, w.beta);
  for (const auto& m : w.w) {
    put(os, static_cast<std::uint32_t>(m.rows()));
    put(os, static_cast<std::uint32_t>(m.cols()));
  }
  for (std::size_t l = 0; l < w.w.size(); ++l) {
    for (Eigen::Index r = 0; r < w.w[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < w.w[l].cols(); ++c) put(os, w.w[l](r, c));
    }
    for (Eigen::Index r = 0; r < w.b[l].size(); ++r) put(os, w.b[l][r]);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

DecoderWeights read_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a decoder weights file: " + path.string());
  if (get<std::uint32_t>(is, "version") != kVersion) throw IoError("unsupported weights version in " + path.string());
  DecoderWeights w;
  w.latent_dim = static_cast<int>(get<std::uint32_t>(is, "latent dimension"));
  const auto layers = get<std::uint32_t>(is, "layer count");
  if (layers == 0 || layers > 64) throw IoError("implausible layer count in " + path.string());
  w.activation = static_cast<Activation>(get<std::uint32_t>(is, "activation"));
  w.beta = get<double>(is, "beta");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dims(layers);
  for (auto& d : dims) {
    d.first = get<std::uint32_t>(is, "rows");
    d.second = get<std::uint32_t>(is, "cols");
    if (d.first == 0 || d.second == 0 || d.first > 100000 || d.second > 100000) {
      throw IoError("implausible layer shape in " + path.string());
    }
  }
  for (const auto& [rows, cols] : dims) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>(is, "weights");
    }
    VecX b(rows);
    for (Eigen::Index r = 0; r < b.size(); ++r) b[r] = get<double>(is, "bias");
    w.w.push_back(std::move(m));
    w.b.push_back(std::move(b));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in weights file " + path.string());
  try {
    w.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string(e.what()) + " (" + path.string() + ")");
  }
  return w;
}

void write_codes(const std::filesystem::path& path, const std::vector<VecX>& codes) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << std::setprecision(17);
  for (const auto& c : codes) {
    for (Eigen::Index i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<VecX> read_codes(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::vector<VecX> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw IoError("malformed latent code entry '" + cell + "' in " + path.string());
      }
      if (used != cell.size() || !std::isfinite(v)) throw IoError("malformed latent code entry '" + cell + "'");
      vals.push_back(v);
    }
    if (!out.empty() && static_cast<Eigen::Index>(vals.size()) != out.front().size()) {
      throw IoError("latent codes of different lengths in " + path.string());
    }
    out.push_back(Eigen::Map<VecX>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  return out;
}

// ---------------------------------------------------------------------------
// MLP decoder

namespace {

template <class M>
void activate(const DecoderWeights& w, const M& pre, Eigen::Ref<Eigen::ArrayXXd> out) {
  if (w.activation == Activation::kTanh) {
    out = pre.array().tanh();
  } else {
    const double beta = w.beta;
    // log(1 + e^t) = max(t, 0) + log1p(e^{-|t|})
    out = pre.array().unaryExpr([beta](double a) {
      const double t = beta * a;
      return (std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)))) / beta;
    });
  }
}

double activation_slope(const DecoderWeights& w, double a) {
  if (w.activation == Activation::kTanh) {
    const double t = std::tanh(a);
    return 1.0 - t * t;
  }
  return 1.0 / (1.0 + std::exp(-w.beta * a));
}

}  // namespace

MlpDecoder::MlpDecoder(DecoderWeights weights) : weights_(std::move(weights)) { weights_.validate(); }

double MlpDecoder::value(const VecX& z, const Vec3& x) const {
  VecX h(z.size() + 3);
  h << z, x;
  const std::size_t layers = weights_.w.size();
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    VecX a = weights_.w[l] * h + weights_.b[l];
    h.resize(a.size());
    Eigen::ArrayXXd out(a.size(), 1);
    activate(weights_, a, out);
    h = out.matrix();
  }
  return (weights_.w.back() * h + weights_.b.back())[0];
}

double MlpDecoder::value_and_gradients(const VecX& z, const Vec3& x, Vec3& gx, VecX& gz) const {
  const std::size_t layers = weights_.w.size();
  std::vector<VecX> pre(layers);
  VecX h(z.size() + 3);
  h << z, x;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    pre[l] = weights_.w[l] * h + weights_.b[l];
    Eigen::ArrayXXd out(pre[l].size(), 1);
    activate(weights_, pre[l], out);
    h = out.matrix();
  }
  const double f = (weights_.w.back() * h + weights_.b.back())[0];
  // Reverse sweep: row vector of d f / d (layer input).
  Eigen::RowVectorXd g = weights_.w.back().row(0);
  for (std::size_t l = layers - 1; l-- > 0;) {
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] *= activation_slope(weights_, pre[l][i]);
    g = g * weights_.w[l];
  }
  gz = g.head(z.size()).transpose();
  gx = g.tail<3>().transpose();
  return f;
}

void MlpDecoder::values(const VecX& z, const std::vector<Vec3>& xs, double* out) const {
  const std::size_t layers = weights_.w.size();
  const Eigen::Index zdim = z.size();
  // The latent part of the first layer is shared by every point.
  const VecX shift = weights_.w[0].leftCols(zdim) * z + weights_.b[0];
  const Eigen::MatrixXd wx = weights_.w[0].rightCols(3);
  constexpr std::size_t kBlock = 1024;
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((xs.size() + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t start = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t count = std::min(kBlock, xs.size() - start);
    Eigen::MatrixXd xin(3, static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) xin.col(static_cast<Eigen::Index>(i)) = xs[start + i];
    Eigen::MatrixXd a = (wx * xin).colwise() + shift;
    Eigen::ArrayXXd h(a.rows(), a.cols());
    activate(weights_, a, h);
    for (std::size_t l = 1; l + 1 < layers; ++l) {
      a = (weights_.w[l] * h.matrix()).colwise() + weights_.b[l];
      h.resize(a.rows(), a.cols());
      activate(weights_, a, h);
    }
    const Eigen::RowVectorXd f = (weights_.w.back() * h.matrix()).array() + weights_.b.back()[0];
    for (std::size_t i = 0; i < count; ++i) out[start + i] = f[static_cast<Eigen::Index>(i)];
  }
}

// ---------------------------------------------------------------------------

TriangleMesh extract_surface(const Decoder& decoder, const VecX& z, const GridSpec& grid, double g_min) {
  grid.validate();
  const auto n = grid.counts();
  std::vector<Vec3> nodes;
  nodes.reserve(grid.node_count());
  for (int k = 0; k < n[2]; ++k) {
    for (int j = 0; j < n[1]; ++j) {
      for (int i = 0; i < n[0]; ++i) nodes.push_back(grid.node(i, j, k));
    }
  }
  std::vector<double> values = decoder.evaluate_many(z, nodes);
  for (double v : values) {
    if (!std::isfinite(v)) throw NoSurface("decoder produced non-finite values on the grid");
  }
  TriangleMesh mesh = marching_cubes(ScalarGrid(grid, std::move(values)));
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    const double g = decoder.grad_x(z, mesh.vertices()[v]).norm();
    if (!(g >= g_min)) {
      throw IrregularSurface("surface is not regular: |grad_x f| = " + std::to_string(g) + " at a mesh vertex");
    }
  }
  return mesh;
}

}  // namespace latscat
