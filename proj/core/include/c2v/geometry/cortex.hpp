#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "c2v/geometry/mesh.hpp"

namespace c2v::geometry {

/// Vertex-wise average of corresponding pial and white surfaces.
TriMesh midthickness(const TriMesh& pial, const TriMesh& white);

/// Per-vertex thickness: mean of the distance from pial vertex i to the white
/// surface and from white vertex i to the pial surface.
std::vector<double> cortical_thickness(const TriMesh& pial, const TriMesh& white);

/// Midthickness surface with the thickness channel attached.
TriMesh midthickness_with_thickness(const TriMesh& pial, const TriMesh& white);

struct AtrophyOptions {
  double step = 0.05;                     // per-iteration displacement (mm)
  std::optional<double> clearance;        // minimum distance kept to the white surface; defaults to step
  std::optional<std::vector<int>> region; // per-vertex 0/1; absent = all vertices
  bool warn = true;                       // print a warning when every region vertex clamps
};

struct AtrophyResult {
  TriMesh pial;
  std::vector<double> displacement;  // cumulative per-vertex displacement
  std::size_t clamped = 0;           // region vertices stopped by the white surface
  bool all_clamped = false;
  int iterations = 0;
};

/// Moves pial vertices inward along angle-weighted normals (recomputed every
/// iteration) until each has travelled `delta` or would come closer to the
/// white surface than the clearance. Vertices outside the region stay put.
AtrophyResult simulate_atrophy(const TriMesh& pial, const TriMesh& white, double delta,
                               const AtrophyOptions& options = {});

}  // namespace c2v::geometry
