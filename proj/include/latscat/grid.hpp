#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "latscat/common.hpp"

namespace latscat {

/// Cartesian sampling lattice. Nodes are spaced by `h` and centred inside
/// [lower, upper], so a box symmetric about the origin yields a lattice that
/// is invariant under x -> -x.
struct GridSpec {
  Vec3 lower{-1.0, -1.0, -1.0};
  Vec3 upper{1.0, 1.0, 1.0};
  double h = 0.06;

  /// Throws ConfigError unless upper > lower componentwise, h > 0 and every
  /// axis holds at least two nodes.
  void validate() const;

  std::array<int, 3> counts() const;
  Vec3 origin() const;
  Vec3 node(int i, int j, int k) const;
  std::size_t node_count() const;
};

/// Field values on all nodes of a grid, x-fastest ordering.
class ScalarGrid {
 public:
  ScalarGrid(GridSpec grid, std::vector<double> values);

  /// Evaluates `field` on every node. The callable may be invoked concurrently.
  static ScalarGrid sample(const std::function<double(const Vec3&)>& field, const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }
  const std::array<int, 3>& counts() const { return counts_; }
  double at(int i, int j, int k) const { return values_[index(i, j, k)]; }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(counts_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(counts_[1]) * static_cast<std::size_t>(k));
  }
  const std::vector<double>& values() const { return values_; }

 private:
  GridSpec grid_;
  std::array<int, 3> counts_;
  std::vector<double> values_;
};

}  // namespace latscat
