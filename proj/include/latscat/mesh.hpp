#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "latscat/common.hpp"

namespace latscat {

using Face = std::array<int, 3>;

/// Triangulated surface with per-face geometry cached at construction.
///
/// The mesh is immutable once built. Construction rejects out-of-range
/// indices and zero-area faces; closedness and orientation are checked on
/// demand through `check_closed()` because single faces are useful on their own
/// (quadrature, tests).
class TriangleMesh {
 public:
  TriangleMesh() = default;
  TriangleMesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  std::size_t face_count() const { return faces_.size(); }
  std::size_t vertex_count() const { return vertices_.size(); }

  const Vec3& vertex(int face, int corner) const { return vertices_[faces_[face][corner]]; }
  const Vec3& centroid(std::size_t f) const { return centroids_[f]; }
  const Vec3& normal(std::size_t f) const { return normals_[f]; }
  double area(std::size_t f) const { return areas_[f]; }
  double total_area() const { return total_area_; }
  double mean_edge_length() const { return mean_edge_; }

  /// Number of undirected edges used by exactly one face.
  std::size_t boundary_edge_count() const;

  /// True when every edge is shared by exactly two faces that traverse it in
  /// opposite directions.
  bool is_closed_oriented() const;

  /// Throws DegenerateMesh when the mesh is not closed and consistently oriented.
  void check_closed() const;

  TriangleMesh translated(const Vec3& t) const;
  TriangleMesh flipped() const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<Vec3> centroids_;
  std::vector<Vec3> normals_;
  std::vector<double> areas_;
  double total_area_ = 0.0;
  double mean_edge_ = 0.0;
};

/// Signed enclosed volume by the divergence theorem; positive for outward normals.
double mesh_volume(const TriangleMesh& mesh);

/// True when `p` lies inside the closed mesh (ray parity along +z with a
/// slightly tilted ray to avoid hitting edges).
bool point_inside(const TriangleMesh& mesh, const Vec3& p);

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
TriangleMesh read_obj(const std::filesystem::path& path);

}  // namespace latscat
