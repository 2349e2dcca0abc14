#include "latscat/marching_cubes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "latscat/errors.hpp"

namespace latscat {

namespace {

Eigen::Vector3i corner_offset(int c) { return {c & 1, (c >> 1) & 1, (c >> 2) & 1}; }

int edge_between(int c0, int c1) {
  const int diff = c0 ^ c1;
  const int axis = diff == 1 ? 0 : (diff == 2 ? 1 : 2);
  const int lo = std::min(c0, c1);
  int r = 0;
  int bit = 0;
  for (int a = 0; a < 3; ++a) {
    if (a == axis) continue;
    r |= ((lo >> a) & 1) << bit;
    ++bit;
  }
  return 4 * axis + r;
}

Eigen::Vector3d edge_midpoint(int e) {
  const auto cs = cube_edge_corners(e);
  return 0.5 * (corner_offset(cs[0]) + corner_offset(cs[1])).cast<double>();
}

std::vector<std::array<int, 3>> build_case(int mask) {
  auto inside = [mask](int c) { return ((mask >> c) & 1) != 0; };
  // next_edge[e] = successor of crossing edge e along the oriented loop.
  std::array<int, 12> next_edge;
  next_edge.fill(-1);

  for (int axis = 0; axis < 3; ++axis) {
    for (int side = 0; side < 2; ++side) {
      const int u = (axis + 1) % 3;
      const int v = (axis + 2) % 3;
      // Corners counter-clockwise about the outward face normal.
      Eigen::Vector3d n = Eigen::Vector3d::Zero();
      n[axis] = side ? 1.0 : -1.0;
      std::array<int, 4> ring{};
      const int base = side << axis;
      const std::array<std::array<int, 2>, 4> uv = {{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
      for (int q = 0; q < 4; ++q) ring[q] = base | (uv[q][0] << u) | (uv[q][1] << v);
      {
        // Flip ring to be counter-clockwise about n.
        const Eigen::Vector3d p0 = corner_offset(ring[0]).cast<double>();
        const Eigen::Vector3d p1 = corner_offset(ring[1]).cast<double>();
        const Eigen::Vector3d p2 = corner_offset(ring[2]).cast<double>();
        if ((p1 - p0).cross(p2 - p1).dot(n) < 0.0) std::swap(ring[1], ring[3]);
      }
      std::array<int, 4> ring_edges{};
      std::vector<int> crossing;
      for (int q = 0; q < 4; ++q) {
        ring_edges[q] = edge_between(ring[q], ring[(q + 1) % 4]);
        if (inside(ring[q]) != inside(ring[(q + 1) % 4])) crossing.push_back(q);
      }
      // Segments as pairs of ring-edge slots together with the inside corners they cut off.
      std::vector<std::pair<std::array<int, 2>, std::vector<int>>> segments;
      if (crossing.size() == 2) {
        std::vector<int> in;
        for (int q = 0; q < 4; ++q) {
          if (inside(ring[q])) in.push_back(ring[q]);
        }
        segments.push_back({{ring_edges[crossing[0]], ring_edges[crossing[1]]}, in});
      } else if (crossing.size() == 4) {
        for (int q = 0; q < 4; ++q) {
          if (inside(ring[q])) {
            segments.push_back({{ring_edges[(q + 3) % 4], ring_edges[q]}, {ring[q]}});
          }
        }
      }
      for (auto& [seg, in] : segments) {
        Eigen::Vector3d c_in = Eigen::Vector3d::Zero();
        for (int c : in) c_in += corner_offset(c).cast<double>();
        c_in /= static_cast<double>(in.size());
        const Eigen::Vector3d a = edge_midpoint(seg[0]);
        const Eigen::Vector3d b = edge_midpoint(seg[1]);
        // Negative side must lie to the right of a -> b seen from outside.
        int from = seg[0];
        int to = seg[1];
        if (n.cross(b - a).dot(c_in - 0.5 * (a + b)) > 0.0) std::swap(from, to);
        next_edge[from] = to;
      }
    }
  }

  std::vector<std::array<int, 3>> tris;
  std::array<bool, 12> used{};
  for (int start = 0; start < 12; ++start) {
    if (next_edge[start] < 0 || used[start]) continue;
    std::vector<int> loop;
    int e = start;
    while (!used[e]) {
      used[e] = true;
      loop.push_back(e);
      e = next_edge[e];
    }
    for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
      tris.push_back({loop[0], loop[i], loop[i + 1]});
    }
  }
  return tris;
}

// Vertex merge by union-find.
struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) { parent[find(b)] = find(a); }
};

double tri_area(const std::vector<Vec3>& v, const Face& f) {
  return 0.5 * (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]).norm();
}

TriangleMesh clean_mesh(std::vector<Vec3> vertices, std::vector<Face> faces, double min_area) {
  DisjointSet ds(vertices.size());
  // Coincident vertices arise when a node value is exactly zero.
  {
    std::map<std::array<double, 3>, int> seen;
    for (int i = 0; i < static_cast<int>(vertices.size()); ++i) {
      const std::array<double, 3> key{vertices[i][0], vertices[i][1], vertices[i][2]};
      auto [it, inserted] = seen.emplace(key, i);
      if (!inserted) ds.unite(it->second, i);
    }
  }
  for (int pass = 0; pass < 64; ++pass) {
    bool changed = false;
    for (auto& f : faces) {
      for (int& idx : f) idx = ds.find(idx);
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;
      if (tri_area(vertices, f) >= min_area) continue;
      // Collapse the shortest edge onto its midpoint.
      int best = 0;
      double best_len = std::numeric_limits<double>::infinity();
      for (int c = 0; c < 3; ++c) {
        const double len = (vertices[f[(c + 1) % 3]] - vertices[f[c]]).norm();
        if (len < best_len) {
          best_len = len;
          best = c;
        }
      }
      const int a = f[best];
      const int b = f[(best + 1) % 3];
      vertices[a] = 0.5 * (vertices[a] + vertices[b]);
      ds.unite(a, b);
      changed = true;
    }
    if (!changed) break;
  }
  for (auto& f : faces) {
    for (int& idx : f) idx = ds.find(idx);
  }
  std::vector<Face> kept;
  kept.reserve(faces.size());
  for (const auto& f : faces) {
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;
    kept.push_back(f);
  }
  // Collapses can leave a face and its mirror image glued back to back; drop both.
  {
    std::map<std::array<int, 3>, std::vector<std::size_t>> by_set;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      std::array<int, 3> key = kept[i];
      std::sort(key.begin(), key.end());
      by_set[key].push_back(i);
    }
    std::vector<bool> drop(kept.size(), false);
    for (const auto& [key, ids] : by_set) {
      if (ids.size() < 2) continue;
      for (std::size_t i : ids) drop[i] = true;
    }
    std::vector<Face> filtered;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (!drop[i]) filtered.push_back(kept[i]);
    }
    kept.swap(filtered);
  }
  std::vector<int> remap(vertices.size(), -1);
  std::vector<Vec3> out_vertices;
  for (auto& f : kept) {
    for (int& idx : f) {
      if (remap[idx] < 0) {
        remap[idx] = static_cast<int>(out_vertices.size());
        out_vertices.push_back(vertices[idx]);
      }
      idx = remap[idx];
    }
  }
  return TriangleMesh(std::move(out_vertices), std::move(kept));
}

}  // namespace

std::array<int, 2> cube_edge_corners(int e) {
  const int axis = e / 4;
  const int r = e % 4;
  int c = 0;
  int bit = 0;
  for (int a = 0; a < 3; ++a) {
    if (a == axis) continue;
    c |= ((r >> bit) & 1) << a;
    ++bit;
  }
  return {c, c | (1 << axis)};
}

const std::array<std::vector<std::array<int, 3>>, 256>& marching_cubes_table() {
  static const auto table = [] {
    std::array<std::vector<std::array<int, 3>>, 256> t;
    for (int mask = 0; mask < 256; ++mask) t[mask] = build_case(mask);
    return t;
  }();
  return table;
}

TriangleMesh marching_cubes(const ScalarGrid& field) {
  const auto& table = marching_cubes_table();
  const GridSpec& grid = field.grid();
  const auto n = field.counts();

  bool any_inside = false;
  bool any_outside = false;
  for (double v : field.values()) {
    if (!std::isfinite(v)) throw NoSurface("field is not finite on every grid node");
    (v < 0.0 ? any_inside : any_outside) = true;
  }
  if (!any_inside || !any_outside) throw NoSurface("field has uniform sign on all grid nodes");
  for (int k = 0; k < n[2]; ++k) {
    for (int j = 0; j < n[1]; ++j) {
      for (int i = 0; i < n[0]; ++i) {
        const bool boundary =
            i == 0 || j == 0 || k == 0 || i == n[0] - 1 || j == n[1] - 1 || k == n[2] - 1;
        if (boundary && field.at(i, j, k) < 0.0) {
          throw OpenSurface("zero level set reaches the grid boundary near node " +
                            std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(k));
        }
      }
    }
  }

  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  // Global edge key: 3 * node index + axis.
  std::unordered_map<std::size_t, int> edge_vertex;
  auto vertex_on = [&](int i, int j, int k, int axis) {
    const std::size_t key = 3 * field.index(i, j, k) + static_cast<std::size_t>(axis);
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    int i1 = i, j1 = j, k1 = k;
    (axis == 0 ? i1 : axis == 1 ? j1 : k1) += 1;
    const double v0 = field.at(i, j, k);
    const double v1 = field.at(i1, j1, k1);
    const double t = v0 / (v0 - v1);
    const Vec3 p0 = grid.node(i, j, k);
    const Vec3 p1 = grid.node(i1, j1, k1);
    const int id = static_cast<int>(vertices.size());
    vertices.push_back(p0 + t * (p1 - p0));
    edge_vertex.emplace(key, id);
    return id;
  };

  for (int k = 0; k + 1 < n[2]; ++k) {
    for (int j = 0; j + 1 < n[1]; ++j) {
      for (int i = 0; i + 1 < n[0]; ++i) {
        int mask = 0;
        for (int c = 0; c < 8; ++c) {
          if (field.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) < 0.0) mask |= 1 << c;
        }
        if (mask == 0 || mask == 255) continue;
        for (const auto& tri : table[mask]) {
          Face f{};
          for (int c = 0; c < 3; ++c) {
            const auto ends = cube_edge_corners(tri[c]);
            const int lo = ends[0];
            const int axis = tri[c] / 4;
            f[c] = vertex_on(i + (lo & 1), j + ((lo >> 1) & 1), k + ((lo >> 2) & 1), axis);
          }
          faces.push_back(f);
        }
      }
    }
  }

  TriangleMesh mesh = clean_mesh(std::move(vertices), std::move(faces), 1e-12 * grid.h * grid.h);
  if (mesh.face_count() == 0) throw NoSurface("level set collapsed to nothing after cleanup");
  mesh.check_closed();
  return mesh;
}

TriangleMesh marching_cubes(const std::function<double(const Vec3&)>& field, const GridSpec& grid) {
  return marching_cubes(ScalarGrid::sample(field, grid));
}

}  // namespace latscat
