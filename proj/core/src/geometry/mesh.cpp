#include "c2v/geometry/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>

#include "c2v/common/error.hpp"

namespace c2v::geometry {
namespace {

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

// Directed edge -> number of faces using it in that direction.
std::unordered_map<std::uint64_t, int> directed_edges(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const Face& f : mesh.faces) {
    for (int e = 0; e < 3; ++e) ++edges[edge_key(f[e], f[(e + 1) % 3])];
  }
  return edges;
}

double corner_angle(const Vec3& at, const Vec3& b, const Vec3& c) {
  const Vec3 u = (b - at).normalized();
  const Vec3 v = (c - at).normalized();
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

}  // namespace

void validate_geometry(const TriMesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (!mesh.vertices[i].allFinite()) {
      throw ValidationError("vertex " + std::to_string(i) + " has non-finite coordinates");
    }
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (int idx : mesh.faces[f]) {
      if (idx < 0 || idx >= n) {
        throw ValidationError("face " + std::to_string(f) + ": index out of range");
      }
    }
    if (!(face_area(mesh, f) > 0.0)) {
      throw ValidationError("face " + std::to_string(f) + ": degenerate triangle");
    }
  }
  if (mesh.has_thickness() && mesh.thickness.size() != mesh.vertices.size()) {
    throw ValidationError("thickness channel length does not match vertex count");
  }
}

void validate(const TriMesh& mesh) {
  validate_geometry(mesh);
  for (const auto& [key, count] : directed_edges(mesh)) {
    const int a = static_cast<int>(key >> 32);
    const int b = static_cast<int>(key & 0xffffffffu);
    if (count > 1) throw TopologyError(a, b, "non-manifold or inconsistently oriented edge");
  }
}

void validate_closed(const TriMesh& mesh) {
  validate(mesh);
  if (mesh.faces.empty()) throw ValidationError("mesh has no faces");
  const auto edges = directed_edges(mesh);
  for (const auto& [key, count] : edges) {
    const int a = static_cast<int>(key >> 32);
    const int b = static_cast<int>(key & 0xffffffffu);
    if (!edges.contains(edge_key(b, a))) {
      throw TopologyError(a, b, "boundary edge (mesh is not closed)");
    }
  }
}

void require_correspondence(const TriMesh& a, const TriMesh& b, const char* what) {
  if (a.vertices.size() != b.vertices.size() || a.faces != b.faces) {
    throw ShapeMismatch(std::string(what) + ": meshes are not in vertex correspondence");
  }
}

double face_area(const TriMesh& mesh, std::size_t f) {
  const Face& t = mesh.faces[f];
  const Vec3& a = mesh.vertices[t[0]];
  return 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
}

double total_area(const TriMesh& mesh) {
  double s = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) s += face_area(mesh, f);
  return s;
}

Vec3 face_normal(const TriMesh& mesh, std::size_t f) {
  const Face& t = mesh.faces[f];
  const Vec3& a = mesh.vertices[t[0]];
  return (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).normalized();
}

std::vector<Vec3> face_normals(const TriMesh& mesh) {
  std::vector<Vec3> n(mesh.faces.size());
  for (std::size_t f = 0; f < n.size(); ++f) n[f] = face_normal(mesh, f);
  return n;
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
  std::vector<Vec3> n(mesh.vertices.size(), Vec3::Zero());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& t = mesh.faces[f];
    const Vec3 fn = face_normal(mesh, f);
    for (int c = 0; c < 3; ++c) {
      const Vec3& p = mesh.vertices[t[c]];
      n[t[c]] += corner_angle(p, mesh.vertices[t[(c + 1) % 3]], mesh.vertices[t[(c + 2) % 3]]) * fn;
    }
  }
  for (Vec3& v : n) {
    const double len = v.norm();
    if (len > 0.0) v /= len;
  }
  return n;
}

TriMesh make_icosphere(int subdivisions, double radius, const Vec3& center) {
  if (subdivisions < 0) throw ValidationError("icosphere subdivision level must be >= 0");
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                         {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                         {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (Vec3& p : v) p.normalize();
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const Face& t : f) {
      const int ab = mid(t[0], t[1]);
      const int bc = mid(t[1], t[2]);
      const int ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  TriMesh mesh;
  mesh.vertices.reserve(v.size());
  for (const Vec3& p : v) mesh.vertices.push_back(center + radius * p);
  mesh.faces = std::move(f);
  return mesh;
}

TriMesh make_grid_sheet(int nx, int ny, double size_x, double size_y, double height) {
  if (nx < 1 || ny < 1) throw ValidationError("grid sheet needs at least one cell per axis");
  TriMesh mesh;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      mesh.vertices.emplace_back(size_x * (static_cast<double>(i) / nx - 0.5),
                                 size_y * (static_cast<double>(j) / ny - 0.5), height);
    }
  }
  const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      mesh.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return mesh;
}

TriMesh transformed(const TriMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation) {
  TriMesh out = mesh;
  for (Vec3& p : out.vertices) p = rotation * p + translation;
  return out;
}

std::vector<TriMesh> connected_components(const TriMesh& mesh) {
  const std::size_t n = mesh.vertices.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const Face& f : mesh.faces) {
    for (int a = 1; a < 3; ++a) {
      const int r0 = find(f[0]);
      const int r1 = find(f[a]);
      if (r0 != r1) parent[std::max(r0, r1)] = std::min(r0, r1);
    }
  }
  std::vector<int> component(n, -1);
  std::vector<int> local(n, -1);
  std::vector<TriMesh> out;
  for (std::size_t v = 0; v < n; ++v) {
    const int root = find(static_cast<int>(v));
    if (component[root] < 0) {
      component[root] = static_cast<int>(out.size());
      out.emplace_back();
    }
    TriMesh& m = out[static_cast<std::size_t>(component[root])];
    local[v] = static_cast<int>(m.vertices.size());
    m.vertices.push_back(mesh.vertices[v]);
    if (mesh.has_thickness()) m.thickness.push_back(mesh.thickness[v]);
  }
  for (const Face& f : mesh.faces) {
    out[static_cast<std::size_t>(component[find(f[0])])].faces.push_back({local[f[0]], local[f[1]], local[f[2]]});
  }
  std::erase_if(out, [](const TriMesh& m) { return m.faces.empty(); });
  return out;
}

SurfacePair surfaces_from_midthickness(const TriMesh& mid) {
  if (!mid.has_thickness()) throw ValidationError("midthickness mesh has no thickness channel");
  validate(mid);
  const auto normals = vertex_normals(mid);
  SurfacePair pair{mid, mid};
  pair.white.thickness.clear();
  pair.pial.thickness.clear();
  for (std::size_t i = 0; i < mid.vertices.size(); ++i) {
    const double half = 0.5 * std::max(0.0, mid.thickness[i]);
    pair.white.vertices[i] = mid.vertices[i] - half * normals[i];
    pair.pial.vertices[i] = mid.vertices[i] + half * normals[i];
  }
  return pair;
}

}  // namespace c2v::geometry
