#include "latscat/mesh.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "latscat/errors.hpp"

namespace latscat {

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const int nv = static_cast<int>(vertices_.size());
  centroids_.resize(faces_.size());
  normals_.resize(faces_.size());
  areas_.resize(faces_.size());
  double edge_sum = 0.0;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    for (int c = 0; c < 3; ++c) {
      if (faces_[f][c] < 0 || faces_[f][c] >= nv) {
        throw DegenerateMesh("face " + std::to_string(f) + " references a missing vertex");
      }
    }
    const Vec3& a = vertices_[faces_[f][0]];
    const Vec3& b = vertices_[faces_[f][1]];
    const Vec3& c = vertices_[faces_[f][2]];
    const Vec3 cr = (b - a).cross(c - a);
    const double twice_area = cr.norm();
    if (!(twice_area > 0.0) || !std::isfinite(twice_area)) {
      throw DegenerateMesh("face " + std::to_string(f) + " has zero area");
    }
    areas_[f] = 0.5 * twice_area;
    normals_[f] = cr / twice_area;
    centroids_[f] = (a + b + c) / 3.0;
    total_area_ += areas_[f];
    edge_sum += (b - a).norm() + (c - b).norm() + (a - c).norm();
  }
  if (!faces_.empty()) {
    mean_edge_ = edge_sum / (3.0 * static_cast<double>(faces_.size()));
  }
}

namespace {

// Directed edge multiplicities keyed by (from, to).
std::map<std::pair<int, int>, int> directed_edges(const std::vector<Face>& faces) {
  std::map<std::pair<int, int>, int> edges;
  for (const auto& f : faces) {
    for (int c = 0; c < 3; ++c) {
      ++edges[{f[c], f[(c + 1) % 3]}];
    }
  }
  return edges;
}

}  // namespace

std::size_t TriangleMesh::boundary_edge_count() const {
  std::map<std::pair<int, int>, int> undirected;
  for (const auto& f : faces_) {
    for (int c = 0; c < 3; ++c) {
      const int a = f[c];
      const int b = f[(c + 1) % 3];
      ++undirected[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::size_t count = 0;
  for (const auto& [edge, n] : undirected) {
    if (n == 1) ++count;
  }
  return count;
}

bool TriangleMesh::is_closed_oriented() const {
  if (faces_.empty()) return false;
  const auto edges = directed_edges(faces_);
  for (const auto& [edge, n] : edges) {
    if (n != 1) return false;
    const auto twin = edges.find({edge.second, edge.first});
    if (twin == edges.end() || twin->second != 1) return false;
  }
  return true;
}

void TriangleMesh::check_closed() const {
  if (!is_closed_oriented()) {
    throw DegenerateMesh("mesh is not closed and consistently oriented (" +
                         std::to_string(boundary_edge_count()) + " boundary edges)");
  }
}

TriangleMesh TriangleMesh::translated(const Vec3& t) const {
  std::vector<Vec3> v = vertices_;
  for (auto& p : v) p += t;
  return TriangleMesh(std::move(v), faces_);
}

TriangleMesh TriangleMesh::flipped() const {
  std::vector<Face> f = faces_;
  for (auto& face : f) std::swap(face[1], face[2]);
  return TriangleMesh(vertices_, std::move(f));
}

double mesh_volume(const TriangleMesh& mesh) {
  double v = 0.0;
  for (const auto& f : mesh.faces()) {
    const Vec3& a = mesh.vertices()[f[0]];
    const Vec3& b = mesh.vertices()[f[1]];
    const Vec3& c = mesh.vertices()[f[2]];
    v += a.dot(b.cross(c));
  }
  return v / 6.0;
}

bool point_inside(const TriangleMesh& mesh, const Vec3& p) {
  // Irrational-ish direction keeps the ray off mesh edges and vertices.
  const Vec3 dir = Vec3(1.234567e-4, 2.345678e-4, 1.0).normalized();
  int crossings = 0;
  for (const auto& f : mesh.faces()) {
    const Vec3& a = mesh.vertices()[f[0]];
    const Vec3& b = mesh.vertices()[f[1]];
    const Vec3& c = mesh.vertices()[f[2]];
    // Moller-Trumbore.
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-300) continue;
    const double inv = 1.0 / det;
    const Vec3 tv = p - a;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    if (e2.dot(qv) * inv > 0.0) ++crossings;
  }
  return (crossings % 2) == 1;
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices()) {
    out << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  }
  for (const auto& f : mesh.faces()) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v[0] >> v[1] >> v[2])) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed vertex");
      }
      vertices.push_back(v);
    } else if (tag == "f") {
      Face f{};
      for (int c = 0; c < 3; ++c) {
        std::string tok;
        if (!(ls >> tok)) {
          throw IoError(path.string() + ":" + std::to_string(line_no) + ": face needs 3 indices");
        }
        // Accept "i", "i/t" and "i/t/n".
        f[c] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      std::string extra;
      if (ls >> extra) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": only triangles are supported");
      }
      faces.push_back(f);
    }
  }
  return TriangleMesh(std::move(vertices), std::move(faces));
}

}  // namespace latscat
