#include "latscat/grid.hpp"

#include <cmath>
#include <sstream>

#include "latscat/errors.hpp"

namespace latscat {

void GridSpec::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ConfigError("grid spacing must be positive and finite");
  }
  for (int a = 0; a < 3; ++a) {
    if (!(upper[a] > lower[a])) {
      std::ostringstream os;
      os << "grid upper corner must exceed lower corner on axis " << a;
      throw ConfigError(os.str());
    }
  }
  const auto n = counts();
  if (n[0] < 2 || n[1] < 2 || n[2] < 2) {
    throw ConfigError("grid spacing too coarse: fewer than two nodes on an axis");
  }
}

std::array<int, 3> GridSpec::counts() const {
  std::array<int, 3> n{};
  for (int a = 0; a < 3; ++a) {
    n[a] = static_cast<int>(std::floor((upper[a] - lower[a]) / h + 1e-9)) + 1;
  }
  return n;
}

Vec3 GridSpec::origin() const {
  const auto n = counts();
  Vec3 o;
  for (int a = 0; a < 3; ++a) {
    o[a] = lower[a] + 0.5 * ((upper[a] - lower[a]) - (n[a] - 1) * h);
  }
  return o;
}

Vec3 GridSpec::node(int i, int j, int k) const {
  const Vec3 o = origin();
  return {o[0] + i * h, o[1] + j * h, o[2] + k * h};
}

std::size_t GridSpec::node_count() const {
  const auto n = counts();
  return static_cast<std::size_t>(n[0]) * n[1] * n[2];
}

ScalarGrid::ScalarGrid(GridSpec grid, std::vector<double> values)
    : grid_(std::move(grid)), counts_(grid_.counts()), values_(std::move(values)) {
  if (values_.size() != grid_.node_count()) {
    throw DimensionMismatch("scalar grid value count does not match node count");
  }
}

ScalarGrid ScalarGrid::sample(const std::function<double(const Vec3&)>& field, const GridSpec& grid) {
  grid.validate();
  const auto n = grid.counts();
  std::vector<double> values(grid.node_count());
  const Vec3 o = grid.origin();
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n[2]; ++k) {
    for (int j = 0; j < n[1]; ++j) {
      for (int i = 0; i < n[0]; ++i) {
        const Vec3 x{o[0] + i * grid.h, o[1] + j * grid.h, o[2] + k * grid.h};
        values[static_cast<std::size_t>(i) + static_cast<std::size_t>(n[0]) * (j + static_cast<std::size_t>(n[1]) * k)] =
            field(x);
      }
    }
  }
  return ScalarGrid(grid, std::move(values));
}

}  // namespace latscat
