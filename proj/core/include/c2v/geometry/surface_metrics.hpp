#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "c2v/geometry/mesh.hpp"

namespace c2v::geometry {

/// Area-weighted uniform points on the surface: a triangle is picked with
/// probability proportional to its area, then a uniform barycentric point is
/// drawn in it. Point n depends only on (seed, n).
std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t n_points, std::uint64_t seed);

/// Average symmetric surface distance between two meshes:
/// (sum_{p in P_a} d(p, B) + sum_{p in P_b} d(p, A)) / (|P_a| + |P_b|).
/// Surface `a` is sampled with seed_a and `b` with seed_b.
double assd(const TriMesh& a, const TriMesh& b, std::size_t n_points, std::uint64_t seed_a, std::uint64_t seed_b);

/// Same, with both seeds derived from one.
double assd(const TriMesh& a, const TriMesh& b, std::size_t n_points, std::uint64_t seed);

/// Mean of the distances from sampled points of `from` to the surface `to`.
double mean_surface_distance(const TriMesh& from, const TriMesh& to, std::size_t n_points, std::uint64_t seed);

}  // namespace c2v::geometry
