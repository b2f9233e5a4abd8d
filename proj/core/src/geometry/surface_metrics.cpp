#include "c2v/geometry/surface_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "c2v/common/error.hpp"
#include "c2v/common/parallel.hpp"
#include "c2v/common/rng.hpp"
#include "c2v/geometry/distance.hpp"

namespace c2v::geometry {
namespace {

std::vector<double> distances_to(const std::vector<Vec3>& points, const PointMeshDistance& surface) {
  std::vector<double> d(points.size());
  parallel_for(points.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) d[i] = surface.distance(points[i]);
  });
  return d;
}

}  // namespace

std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t n_points, std::uint64_t seed) {
  validate_geometry(mesh);
  std::vector<double> cdf(mesh.faces.size());
  double acc = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    acc += face_area(mesh, f);
    cdf[f] = acc;
  }
  if (!(acc > 0.0)) throw ValidationError("surface sampling: mesh has zero total area");
  const CounterRng rng = CounterRng::derive(seed, "surface-sample");
  std::vector<Vec3> points(n_points);
  parallel_for(n_points, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      const double u = rng.uniform(3 * n) * acc;
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const std::size_t f = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
      const double r1 = std::sqrt(rng.uniform(3 * n + 1));
      const double r2 = rng.uniform(3 * n + 2);
      const Face& t = mesh.faces[f];
      points[n] = (1.0 - r1) * mesh.vertices[t[0]] + r1 * (1.0 - r2) * mesh.vertices[t[1]] +
                  r1 * r2 * mesh.vertices[t[2]];
    }
  });
  return points;
}

double assd(const TriMesh& a, const TriMesh& b, std::size_t n_points, std::uint64_t seed_a, std::uint64_t seed_b) {
  if (n_points < 1) throw ValidationError("assd: n_points must be >= 1");
  const auto pa = sample_surface(a, n_points, seed_a);
  const auto pb = sample_surface(b, n_points, seed_b);
  const PointMeshDistance qa(a);
  const PointMeshDistance qb(b);
  const auto da = distances_to(pa, qb);
  const auto db = distances_to(pb, qa);
  return (pairwise_sum(da) + pairwise_sum(db)) / static_cast<double>(pa.size() + pb.size());
}

double assd(const TriMesh& a, const TriMesh& b, std::size_t n_points, std::uint64_t seed) {
  return assd(a, b, n_points, hash_combine(seed, 1), hash_combine(seed, 2));
}

double mean_surface_distance(const TriMesh& from, const TriMesh& to, std::size_t n_points, std::uint64_t seed) {
  if (n_points < 1) throw ValidationError("mean_surface_distance: n_points must be >= 1");
  const auto p = sample_surface(from, n_points, seed);
  const auto d = distances_to(p, PointMeshDistance(to));
  return pairwise_sum(d) / static_cast<double>(d.size());
}

}  // namespace c2v::geometry
