#include "c2v/geometry/distance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "c2v/common/error.hpp"
#include "c2v/common/parallel.hpp"

namespace c2v::geometry {

// Region-based closest point (Ericson, Real-Time Collision Detection 5.1.5).
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return {a, TriangleFeature::kVertex0};

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return {b, TriangleFeature::kVertex1};

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return {a + v * ab, TriangleFeature::kEdge0};
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return {c, TriangleFeature::kVertex2};

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return {a + w * ac, TriangleFeature::kEdge2};
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + w * (c - b), TriangleFeature::kEdge1};
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return {a + ab * v + ac * w, TriangleFeature::kFace};
}

PointMeshDistance::PointMeshDistance(TriMesh mesh) : mesh_(std::move(mesh)) {
  validate_geometry(mesh_);
  if (mesh_.faces.empty()) throw ValidationError("distance query on a mesh without faces");
  const std::size_t nf = mesh_.faces.size();
  std::vector<Vec3> centroids(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const Face& t = mesh_.faces[f];
    centroids[f] = (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
  }
  order_.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) order_[f] = static_cast<std::uint32_t>(f);
  nodes_.reserve(nf);
  build(0, static_cast<std::uint32_t>(nf), centroids);
}

std::int32_t PointMeshDistance::build(std::uint32_t first, std::uint32_t count,
                                      const std::vector<Vec3>& centroids) {
  constexpr std::uint32_t kLeafSize = 4;
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (std::uint32_t i = first; i < first + count; ++i) {
    const Face& t = mesh_.faces[order_[i]];
    for (int c = 0; c < 3; ++c) box.extend(mesh_.vertices[t[c]]);
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[id].box = box;
  if (count <= kLeafSize) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  int axis = 0;
  centroid_box.sizes().maxCoeff(&axis);
  const std::uint32_t half = count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + first + half, order_.begin() + first + count,
                   [&](std::uint32_t x, std::uint32_t y) {
                     if (centroids[x][axis] != centroids[y][axis]) return centroids[x][axis] < centroids[y][axis];
                     return x < y;
                   });
  const std::int32_t left = build(first, half, centroids);
  const std::int32_t right = build(first + half, count - half, centroids);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

ClosestPoint PointMeshDistance::closest(const Vec3& p) const {
  ClosestPoint best;
  best.squared_distance = std::numeric_limits<double>::infinity();
  std::array<std::int32_t, 128> stack;
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squaredExteriorDistance(p) >= best.squared_distance) continue;
    if (node.left < 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t f = order_[i];
        const Face& t = mesh_.faces[f];
        const auto tp =
            closest_point_on_triangle(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
        const double d2 = (tp.point - p).squaredNorm();
        if (d2 < best.squared_distance || (d2 == best.squared_distance && f < best.face)) {
          best = {d2, f, tp.point, tp.feature};
        }
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
    const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
    // Push the farther child first so the nearer one is searched first.
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return best;
}

double PointMeshDistance::distance(const Vec3& p) const { return std::sqrt(closest(p).squared_distance); }

SignedDistance::SignedDistance(TriMesh mesh) : query_((validate_closed(mesh), std::move(mesh))) {
  const TriMesh& m = query_.mesh();
  face_normals_ = face_normals(m);
  vertex_normals_ = vertex_normals(m);
  std::unordered_map<std::uint64_t, std::size_t> edge_owner;
  edge_owner.reserve(m.faces.size() * 3);
  const auto key = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  };
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    for (int e = 0; e < 3; ++e) edge_owner[key(m.faces[f][e], m.faces[f][(e + 1) % 3])] = f;
  }
  edge_normals_.resize(m.faces.size() * 3);
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    for (int e = 0; e < 3; ++e) {
      const std::size_t other = edge_owner.at(key(m.faces[f][(e + 1) % 3], m.faces[f][e]));
      edge_normals_[3 * f + e] = face_normals_[f] + face_normals_[other];
    }
  }
}

double SignedDistance::operator()(const Vec3& p) const {
  const ClosestPoint cp = query_.closest(p);
  if (cp.squared_distance == 0.0) return 0.0;
  const Face& t = query_.mesh().faces[cp.face];
  Vec3 normal;
  switch (cp.feature) {
    case TriangleFeature::kFace: normal = face_normals_[cp.face]; break;
    case TriangleFeature::kEdge0: normal = edge_normals_[3 * cp.face + 0]; break;
    case TriangleFeature::kEdge1: normal = edge_normals_[3 * cp.face + 1]; break;
    case TriangleFeature::kEdge2: normal = edge_normals_[3 * cp.face + 2]; break;
    case TriangleFeature::kVertex0: normal = vertex_normals_[t[0]]; break;
    case TriangleFeature::kVertex1: normal = vertex_normals_[t[1]]; break;
    case TriangleFeature::kVertex2: normal = vertex_normals_[t[2]]; break;
  }
  const double d = std::sqrt(cp.squared_distance);
  return (p - cp.point).dot(normal) >= 0.0 ? d : -d;
}

double signed_distance(const TriMesh& mesh, const Vec3& p) { return SignedDistance(mesh)(p); }

Volume sample_sdf_grid(const SignedDistance& sdf, const Grid& grid) {
  Volume out(grid);
  auto data = out.data();
  parallel_for(grid.voxel_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      const auto [i, j, k] = grid.unflatten(n);
      data[n] = static_cast<float>(sdf(grid.center(i, j, k)));
    }
  });
  return out;
}

Volume sample_sdf_grid(const TriMesh& mesh, const Grid& grid) {
  grid.validate();
  return sample_sdf_grid(SignedDistance(mesh), grid);
}

}  // namespace c2v::geometry
