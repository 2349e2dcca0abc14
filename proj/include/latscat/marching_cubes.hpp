#pragma once

#include <array>
#include <functional>
#include <vector>

#include "latscat/grid.hpp"
#include "latscat/mesh.hpp"

namespace latscat {

/// Triangles (as triples of local cube-edge ids) for every one of the 256
/// inside/outside corner configurations.
///
/// Corner c sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1); bit c of the
/// case index is set when the corner value is negative. Edge e = 4 * axis + r
/// joins the two corners that differ only along `axis`, r enumerating the
/// remaining two bits in increasing order.
///
/// The table is derived from the cube faces: each face contributes one or two
/// oriented segments between its sign-changing edges, ambiguous faces always
/// isolate the negative corners, and the closed loops obtained by chaining
/// the segments are fan-triangulated. Because the segment choice on a face
/// depends only on that face's four corners, neighbouring cells agree and
/// the extracted surface is watertight. Triangles are wound so that the
/// right-hand normal points from negative to positive values.
const std::array<std::vector<std::array<int, 3>>, 256>& marching_cubes_table();

/// Corner indices joined by cube edge `e`.
std::array<int, 2> cube_edge_corners(int e);

/// Zero level set of the sampled field as a closed, outward-oriented mesh
/// (negative values inside).
///
/// Throws NoSurface when all node values share a sign and OpenSurface when a
/// boundary node is inside (the surface would be clipped by the grid).
/// Faces with area below 1e-12 h^2 are removed by collapsing their shortest
/// edge; DegenerateMesh is thrown if the cleaned mesh is not closed.
TriangleMesh marching_cubes(const ScalarGrid& field);
TriangleMesh marching_cubes(const std::function<double(const Vec3&)>& field, const GridSpec& grid);

}  // namespace latscat
