#include "c2v/geometry/cortex.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "c2v/common/error.hpp"
#include "c2v/common/parallel.hpp"
#include "c2v/geometry/distance.hpp"

namespace c2v::geometry {

TriMesh midthickness(const TriMesh& pial, const TriMesh& white) {
  require_correspondence(pial, white, "midthickness");
  TriMesh mid;
  mid.faces = pial.faces;
  mid.vertices.resize(pial.vertices.size());
  for (std::size_t i = 0; i < mid.vertices.size(); ++i) {
    mid.vertices[i] = 0.5 * (pial.vertices[i] + white.vertices[i]);
  }
  return mid;
}

std::vector<double> cortical_thickness(const TriMesh& pial, const TriMesh& white) {
  require_correspondence(pial, white, "cortical_thickness");
  const PointMeshDistance to_white(white);
  const PointMeshDistance to_pial(pial);
  std::vector<double> t(pial.vertices.size());
  parallel_for(t.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      t[i] = 0.5 * (to_white.distance(pial.vertices[i]) + to_pial.distance(white.vertices[i]));
    }
  }, 64);
  return t;
}

TriMesh midthickness_with_thickness(const TriMesh& pial, const TriMesh& white) {
  TriMesh mid = midthickness(pial, white);
  mid.thickness = cortical_thickness(pial, white);
  return mid;
}

AtrophyResult simulate_atrophy(const TriMesh& pial, const TriMesh& white, double delta,
                               const AtrophyOptions& options) {
  require_correspondence(pial, white, "simulate_atrophy");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ValidationError("atrophy: delta must be >= 0");
  if (!(options.step > 0.0)) throw ValidationError("atrophy: step must be positive");
  const double clearance = options.clearance.value_or(options.step);
  const std::size_t nv = pial.vertices.size();
  if (options.region && options.region->size() != nv) {
    throw ValidationError("atrophy: region mask length does not match vertex count");
  }

  AtrophyResult result{pial, std::vector<double>(nv, 0.0)};
  result.pial.thickness.clear();
  if (delta == 0.0) return result;

  const SignedDistance white_sdf(white);
  std::vector<char> active(nv, 0);
  std::size_t in_region = 0;
  for (std::size_t i = 0; i < nv; ++i) {
    active[i] = !options.region || (*options.region)[i] != 0;
    in_region += active[i] ? 1 : 0;
  }
  std::vector<char> clamped(nv, 0);

  // Small relative slack so a sequence of steps lands exactly on delta.
  const double done_eps = 1e-12 * std::max(1.0, delta);
  while (std::any_of(active.begin(), active.end(), [](char a) { return a != 0; })) {
    const auto normals = vertex_normals(result.pial);
    std::vector<Vec3> next = result.pial.vertices;
    parallel_for(nv, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        if (!active[i]) continue;
        const double step = std::min(options.step, delta - result.displacement[i]);
        const Vec3 candidate = result.pial.vertices[i] - step * normals[i];
        if (white_sdf(candidate) < clearance) {
          clamped[i] = 1;
          active[i] = 0;
          continue;
        }
        next[i] = candidate;
        result.displacement[i] += step;
        if (result.displacement[i] >= delta - done_eps) active[i] = 0;
      }
    }, 64);
    result.pial.vertices = std::move(next);
    ++result.iterations;
  }
  result.clamped = static_cast<std::size_t>(std::count(clamped.begin(), clamped.end(), 1));
  result.all_clamped = in_region > 0 && result.clamped == in_region;
  if (result.all_clamped && options.warn) {
    std::cerr << "warning: atrophy delta " << delta
              << " clamped every region vertex at the white surface\n";
  }
  return result;
}

}  // namespace c2v::geometry
