#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "c2v/geometry/volume.hpp"

namespace c2v::geometry {

using Face = std::array<int, 3>;

/// Indexed triangle surface. Meshes of one population share vertex count and
/// face list, so vertex i of one mesh corresponds to vertex i of another.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<double> thickness;  // optional per-vertex channel; empty if absent

  std::size_t vertex_count() const noexcept { return vertices.size(); }
  std::size_t face_count() const noexcept { return faces.size(); }
  bool has_thickness() const noexcept { return !thickness.empty(); }
};

/// Index range, finite coordinates, non-degenerate faces, thickness length.
void validate_geometry(const TriMesh& mesh);

/// validate_geometry() plus: no directed edge used twice (manifold and
/// consistently oriented).
void validate(const TriMesh& mesh);

/// validate() plus: every edge shared by exactly two faces with opposite
/// orientation (closed, consistently oriented).
void validate_closed(const TriMesh& mesh);

/// Same vertex count and identical face lists.
void require_correspondence(const TriMesh& a, const TriMesh& b, const char* what);

double face_area(const TriMesh& mesh, std::size_t f);
double total_area(const TriMesh& mesh);
Vec3 face_normal(const TriMesh& mesh, std::size_t f);  // unit, right-hand rule
std::vector<Vec3> face_normals(const TriMesh& mesh);

/// Unit vertex normals, each the sum of incident face normals weighted by the
/// incident corner angle.
std::vector<Vec3> vertex_normals(const TriMesh& mesh);

/// Subdivided icosahedron projected onto a sphere; outward orientation.
/// Level 0 has 12 vertices, level n has 10 * 4^n + 2.
TriMesh make_icosphere(int subdivisions, double radius = 1.0, const Vec3& center = Vec3::Zero());

/// Axis-aligned rectangular sheet in the plane z = height, (nx+1) x (ny+1)
/// vertices, normals along +z. Open boundary.
TriMesh make_grid_sheet(int nx, int ny, double size_x, double size_y, double height);

TriMesh transformed(const TriMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation);

/// Vertex-connected components, each with compacted vertex indices, ordered
/// by their smallest original vertex index.
std::vector<TriMesh> connected_components(const TriMesh& mesh);

/// Reconstructs an inner/outer surface pair from a midthickness surface and
/// per-vertex thickness by offsetting +/- thickness/2 along vertex normals.
struct SurfacePair {
  TriMesh white;
  TriMesh pial;
};
SurfacePair surfaces_from_midthickness(const TriMesh& mid);

// OBJ subset: "v x y z" and "f i j k" (1-based), '#' comments. The optional
// per-vertex thickness lives in a sidecar file with extension ".thick".
TriMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const std::filesystem::path& path, const TriMesh& mesh);

std::filesystem::path thickness_sidecar(const std::filesystem::path& obj_path);

}  // namespace c2v::geometry
