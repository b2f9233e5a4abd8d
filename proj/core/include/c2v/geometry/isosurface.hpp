#pragma once

#include "c2v/geometry/mesh.hpp"
#include "c2v/geometry/volume.hpp"

namespace c2v::geometry {

/// Level set {x : f(x) = iso} of the trilinearly sampled field, extracted by
/// marching tetrahedra on a Kuhn (6-tetrahedra) split of every grid cell.
/// Triangles face away from the region f > iso. Crossing vertices are shared
/// between adjacent tetrahedra; zero-area triangles are dropped.
TriMesh extract_isosurface(const Volume& field, double iso);

}  // namespace c2v::geometry
