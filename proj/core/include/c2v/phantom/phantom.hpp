#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "c2v/geometry/conditions.hpp"
#include "c2v/geometry/mesh.hpp"
#include "c2v/geometry/volume.hpp"

namespace c2v::phantom {

/// Parameters of one synthetic nested-surface case. Surfaces are icospheres
/// displaced radially: r_white(u) = inner (1 + bump_amplitude b(u)) and
/// r_pial(u) = r_white(u) + (outer - inner)(1 + thickness_modulation tanh m(u)),
/// with b, m real spherical-harmonic expansions of degrees
/// [min_degree, max_degree] normalized to unit mean square.
struct PhantomSpec {
  double inner_radius = 8.0;
  double outer_radius = 11.0;
  int min_degree = 0;
  int max_degree = 4;
  double bump_amplitude = 0.08;
  double thickness_modulation = 0.25;
  /// (max_degree + 1)^2 coefficients each, indexed l^2 + l + m. Drawn from
  /// `seed` when empty.
  std::vector<double> bump_coefficients;
  std::vector<double> thickness_coefficients;
  int subdivisions = 3;

  double background_level = 0.0;
  double interior_level = 0.7;
  double ribbon_level = 1.0;
  double noise_sigma = 0.03;
  double bias_amplitude = 0.10;
  double bias_wavelength = 48.0;  // mm

  Grid grid = Grid::centered(32, 1.0);
  std::uint64_t seed = 0;

  /// Throws ValidationError on bad radii/levels/degrees.
  void validate() const;
  /// Copy with coefficient vectors filled from the seed.
  PhantomSpec resolved() const;
};

void to_json(nlohmann::json& j, const PhantomSpec& s);
void from_json(const nlohmann::json& j, PhantomSpec& s);

struct PhantomCase {
  PhantomSpec spec;  // resolved
  geometry::TriMesh white;
  geometry::TriMesh pial;
  Volume image;
  geometry::ConditionSet conditions;
};

/// Deterministic function of the spec. Throws ValidationError if the white
/// surface reaches the pial surface anywhere.
PhantomCase generate(const PhantomSpec& spec);

/// Intensity model: level(region) * bias(x) + noise, regions taken from the
/// fused conditions (ribbon -> ribbon level, s_c <= 0 -> interior level,
/// otherwise background).
Volume render_image(const PhantomSpec& spec, const geometry::ConditionSet& cond);

/// Multiplicative bias field sampled on the grid, within [1 - A, 1 + A].
Volume bias_field(const PhantomSpec& spec);

/// Spec for case `index` of a population: same parameters, per-case seed.
PhantomSpec population_member(const PhantomSpec& base, std::uint64_t population_seed, std::size_t index);

struct ExtractedSurfaces {
  geometry::TriMesh white;
  geometry::TriMesh pial;
};

/// Recovers the surface pair from an intensity volume. The pial surface is the
/// largest sheet of the iso-surface halfway between background and ribbon
/// levels; the white surface is the largest sheet halfway between interior and
/// ribbon levels once the outside background is filled with the ribbon level.
ExtractedSurfaces extract_surfaces(const Volume& image, const PhantomSpec& spec);

/// Real spherical harmonics Y_lm at unit direction u, scaled to unit mean
/// square over the sphere; index l^2 + l + m.
std::vector<double> real_spherical_harmonics(int max_degree, const Vec3& u);

}  // namespace c2v::phantom
