#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "c2v/geometry/mesh.hpp"
#include "c2v/geometry/volume.hpp"

namespace c2v::geometry {

/// Which part of a triangle a closest point lies on. Edge k runs from local
/// vertex k to local vertex (k + 1) % 3.
enum class TriangleFeature : std::uint8_t { kFace, kEdge0, kEdge1, kEdge2, kVertex0, kVertex1, kVertex2 };

struct TrianglePoint {
  Vec3 point;
  TriangleFeature feature;
};

TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct ClosestPoint {
  double squared_distance = 0.0;
  std::size_t face = 0;
  Vec3 point = Vec3::Zero();
  TriangleFeature feature = TriangleFeature::kFace;
};

/// Unsigned point-to-surface queries over an axis-aligned bounding volume
/// hierarchy of the mesh triangles. Results are exact (the hierarchy only
/// prunes). Immutable after construction; safe for concurrent queries.
class PointMeshDistance {
 public:
  explicit PointMeshDistance(TriMesh mesh);

  ClosestPoint closest(const Vec3& p) const;
  double distance(const Vec3& p) const;
  const TriMesh& mesh() const noexcept { return mesh_; }

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    std::int32_t left = -1;  // inner node: child indices; leaf: left = -1
    std::int32_t right = -1;
    std::uint32_t first = 0;  // leaf range into order_
    std::uint32_t count = 0;
  };

  std::int32_t build(std::uint32_t first, std::uint32_t count, const std::vector<Vec3>& centroids);

  TriMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

/// Signed distance to a closed, consistently oriented mesh: negative inside,
/// positive outside, zero on the surface. The sign comes from the angle
/// weighted pseudonormal of the closest feature.
class SignedDistance {
 public:
  explicit SignedDistance(TriMesh mesh);

  double operator()(const Vec3& p) const;
  const TriMesh& mesh() const noexcept { return query_.mesh(); }

 private:
  PointMeshDistance query_;
  std::vector<Vec3> face_normals_;
  std::vector<Vec3> vertex_normals_;
  std::vector<Vec3> edge_normals_;  // 3 per face, edge k of face f at 3 * f + k
};

double signed_distance(const TriMesh& mesh, const Vec3& p);

/// Signed distance evaluated at every voxel center.
Volume sample_sdf_grid(const SignedDistance& sdf, const Grid& grid);
Volume sample_sdf_grid(const TriMesh& mesh, const Grid& grid);

}  // namespace c2v::geometry
