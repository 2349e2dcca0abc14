#include "latscat/measurement.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "latscat/errors.hpp"
#include "latscat/marching_cubes.hpp"

namespace latscat {

std::vector<Vec3> fibonacci_directions(int n) {
  if (n < 1) throw NonPositiveN("fibonacci_directions needs N >= 1, got " + std::to_string(n));
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const double x3 = (2.0 * i - 1.0) / n - 1.0;
    const double rho = std::sqrt(std::max(0.0, 1.0 - x3 * x3));
    // The fractional part keeps the angle argument small for large i.
    const double turns = std::fmod(i * phi, 1.0);
    const double ang = 2.0 * kPi * turns;
    out.emplace_back(rho * std::cos(ang), rho * std::sin(ang), x3);
  }
  return out;
}

std::string to_string(DataMode mode) {
  switch (mode) {
    case DataMode::kFull: return "full";
    case DataMode::kBackscatter: return "backscatter";
    case DataMode::kPhaseless: return "phaseless";
  }
  return "full";
}

DataMode parse_mode(const std::string& name) {
  if (name == "full") return DataMode::kFull;
  if (name == "backscatter") return DataMode::kBackscatter;
  if (name == "phaseless") return DataMode::kPhaseless;
  throw UnknownKind("unknown data mode '" + name + "'");
}

MeasurementConfig MeasurementConfig::fibonacci(double k, int l, int m, DataMode mode) {
  MeasurementConfig c;
  c.k = k;
  c.mode = mode;
  c.incident = fibonacci_directions(l);
  if (mode != DataMode::kBackscatter) c.observation = fibonacci_directions(m);
  c.validate();
  return c;
}

void MeasurementConfig::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("wavenumber must be positive");
  if (incident.empty()) throw ConfigError("no incident directions");
  if (mode != DataMode::kBackscatter && observation.empty()) throw ConfigError("no observation directions");
  if (!(phaseless_eps >= 0.0)) throw ConfigError("phaseless eps must be non-negative");
  auto unit = [](const std::vector<Vec3>& dirs, const char* what) {
    for (const auto& d : dirs) {
      if (!d.allFinite() || std::abs(d.norm() - 1.0) > 1e-12) {
        throw ConfigError(std::string(what) + " direction is not a unit vector");
      }
    }
  };
  unit(incident, "incident");
  unit(observation, "observation");
}

bool MeasurementConfig::same_measurements(const MeasurementConfig& o) const {
  if (mode != o.mode || std::abs(k - o.k) > 1e-12 * std::max(1.0, std::abs(k))) return false;
  auto same = [](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if ((a[i] - b[i]).norm() > 1e-12) return false;
    }
    return true;
  };
  return same(incident, o.incident) && (mode == DataMode::kBackscatter || same(observation, o.observation));
}

FarFieldData simulate_data(const TriangleMesh& target, const MeasurementConfig& config, const SimulationOptions& opt) {
  config.validate();
  target.check_closed();
  const BemSystem sys = assemble(target, config.k, opt.assembly);
  std::vector<IncidentWave> waves;
  for (const auto& d : config.incident) waves.push_back(IncidentWave::plane(config.k, d));
  const auto dens = solve_densities(sys, waves, opt.gmres);

  FarFieldData data;
  data.config = config;
  data.values.resize(static_cast<Eigen::Index>(config.rows()), static_cast<Eigen::Index>(config.cols()));
  for (std::size_t l = 0; l < config.rows(); ++l) {
    std::vector<Vec3> obs;
    for (std::size_t m = 0; m < config.cols(); ++m) obs.push_back(config.observation_direction(l, m));
    data.values.row(static_cast<Eigen::Index>(l)) = far_field(target, dens[l].values, config.k, obs).transpose();
  }
  if (config.mode == DataMode::kPhaseless) {
    if (data.config.phaseless_eps == 0.0) data.config.phaseless_eps = 1e-8 * data.values.cwiseAbs2().mean();
    data.values = data.values.cwiseAbs().cast<Complex>();
  }
  return data;
}

FarFieldData simulate_data(const std::function<double(const Vec3&)>& target, const MeasurementConfig& config,
                           const SimulationOptions& opt) {
  GridSpec grid = opt.grid;
  if (opt.refine_grid) grid.h *= 0.5;
  grid.validate();
  const TriangleMesh mesh = marching_cubes(target, grid);
  if (mesh.face_count() == 0) throw NoSurface("target has no zero level set on the grid");
  return simulate_data(mesh, config, opt);
}

FarFieldData simulate_data(const Decoder& decoder, const VecX& z, const MeasurementConfig& config,
                           const SimulationOptions& opt) {
  GridSpec grid = opt.grid;
  if (opt.refine_grid) grid.h *= 0.5;
  SimulationOptions inner = opt;
  inner.refine_grid = false;
  return simulate_data(extract_surface(decoder, z, grid), config, inner);
}

FarFieldData add_noise(const FarFieldData& data, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0)) throw NegativeDelta("noise level must be non-negative");
  FarFieldData out = data;
  out.delta = delta;
  out.noise_seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Row-major draw order so the sequence does not depend on storage layout.
  for (Eigen::Index l = 0; l < out.values.rows(); ++l) {
    for (Eigen::Index m = 0; m < out.values.cols(); ++m) {
      const double factor = 1.0 + delta * normal(rng);
      if (data.config.mode == DataMode::kPhaseless) {
        out.values(l, m) = std::abs(factor) * out.values(l, m);
      } else {
        out.values(l, m) *= factor;
      }
    }
  }
  return out;
}

void write_far_field(const std::filesystem::path& path, const FarFieldData& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto& c = data.config;
  const bool phaseless = c.mode == DataMode::kPhaseless;
  out << std::setprecision(17);
  out << "# latscat-farfield v1 L=" << c.rows() << " M=" << c.cols() << " k=" << c.k << " mode=" << to_string(c.mode)
      << " delta=" << data.delta << " seed=" << data.noise_seed << " eps=" << c.phaseless_eps << '\n';
  out << "l,m,dx,dy,dz,xx,xy,xz," << (phaseless ? "modulus" : "re,im") << '\n';
  for (std::size_t l = 0; l < c.rows(); ++l) {
    for (std::size_t m = 0; m < c.cols(); ++m) {
      const Vec3& d = c.incident[l];
      const Vec3 x = c.observation_direction(l, m);
      const Complex v = data.values(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m));
      out << l << ',' << m << ',' << d[0] << ',' << d[1] << ',' << d[2] << ',' << x[0] << ',' << x[1] << ',' << x[2];
      if (phaseless) {
        out << ',' << v.real() << '\n';
      } else {
        out << ',' << v.real() << ',' << v.imag() << '\n';
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

std::vector<double> split_numbers(const std::string& line, const std::string& where) {
  std::vector<double> vals;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(cell, &used));
      if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw IoError("bad number '" + cell + "' in " + where);
    }
  }
  return vals;
}

}  // namespace

FarFieldData read_far_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string hash, tag, version;
  hs >> hash >> tag >> version;
  if (hash != "#" || tag != "latscat-farfield" || version != "v1") {
    throw IoError(path.string() + " is not a far-field data file");
  }
  std::map<std::string, std::string> kv;
  for (std::string item; hs >> item;) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw IoError("malformed header item '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  for (const char* key : {"L", "M", "k", "mode", "delta", "seed", "eps"}) {
    if (!kv.count(key)) throw IoError(std::string("header lacks ") + key);
  }
  FarFieldData data;
  std::size_t rows = 0, cols = 0;
  try {
    rows = std::stoul(kv["L"]);
    cols = std::stoul(kv["M"]);
    data.config.k = std::stod(kv["k"]);
    data.delta = std::stod(kv["delta"]);
    data.noise_seed = std::stoull(kv["seed"]);
    data.config.phaseless_eps = std::stod(kv["eps"]);
  } catch (const std::exception&) {
    throw IoError("malformed header in " + path.string());
  }
  data.config.mode = parse_mode(kv["mode"]);
  const bool phaseless = data.config.mode == DataMode::kPhaseless;
  const bool back = data.config.mode == DataMode::kBackscatter;
  if (rows == 0 || cols == 0 || (back && cols != 1)) throw IoError("bad dimensions in " + path.string());

  std::string line;
  std::getline(in, line);  // column names
  data.config.incident.assign(rows, Vec3::Constant(std::nan("")));
  if (!back) data.config.observation.assign(cols, Vec3::Constant(std::nan("")));
  data.values.setConstant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                          Complex(std::nan(""), 0.0));
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto v = split_numbers(line, path.string());
    if (v.size() != (phaseless ? 9u : 10u)) throw IoError("wrong column count in " + path.string());
    const auto l = static_cast<std::size_t>(v[0]);
    const auto m = static_cast<std::size_t>(v[1]);
    if (v[0] != static_cast<double>(l) || v[1] != static_cast<double>(m) || l >= rows || m >= cols) {
      throw IoError("row index out of range in " + path.string());
    }
    const Vec3 d(v[2], v[3], v[4]);
    const Vec3 x(v[5], v[6], v[7]);
    auto set_dir = [&](Vec3& slot, const Vec3& val) {
      if (slot.hasNaN()) {
        slot = val;
      } else if ((slot - val).norm() > 1e-12) {
        throw IoError("inconsistent directions in " + path.string());
      }
    };
    set_dir(data.config.incident[l], d);
    if (!back) set_dir(data.config.observation[m], x);
    data.values(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m)) =
        phaseless ? Complex(v[8], 0.0) : Complex(v[8], v[9]);
    ++count;
  }
  if (count != rows * cols || data.values.hasNaN()) throw IoError("missing entries in " + path.string());
  data.config.validate();
  return data;
}

std::size_t indicator_error(const std::function<bool(const Vec3&)>& a, const std::function<bool(const Vec3&)>& b,
                            const GridSpec& grid) {
  grid.validate();
  const auto n = grid.counts();
  const long total = static_cast<long>(grid.node_count());
  std::size_t mismatched = 0;
#pragma omp parallel for reduction(+ : mismatched) schedule(static)
  for (long idx = 0; idx < total; ++idx) {
    const int i = static_cast<int>(idx % n[0]);
    const int j = static_cast<int>((idx / n[0]) % n[1]);
    const int k = static_cast<int>(idx / (static_cast<long>(n[0]) * n[1]));
    const Vec3 p = grid.node(i, j, k);
    if (a(p) != b(p)) ++mismatched;
  }
  return mismatched;
}

std::size_t indicator_error(const Decoder& decoder, const VecX& za, const VecX& zb, const GridSpec& grid) {
  return indicator_error([&](const Vec3& p) { return decoder.evaluate(za, p) <= 0.0; },
                         [&](const Vec3& p) { return decoder.evaluate(zb, p) <= 0.0; }, grid);
}

std::size_t indicator_error(const TriangleMesh& a, const TriangleMesh& b, const GridSpec& grid) {
  return indicator_error([&](const Vec3& p) { return point_inside(a, p); },
                         [&](const Vec3& p) { return point_inside(b, p); }, grid);
}

}  // namespace latscat
