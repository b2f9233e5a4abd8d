#include "c2v/phantom/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/spherical_harmonic.hpp>

#include "c2v/common/error.hpp"
#include "c2v/common/rng.hpp"
#include "c2v/geometry/isosurface.hpp"

namespace c2v::phantom {
namespace {

// Background connected to the grid border, painted with `fill` so no iso-surface forms there.
Volume fill_exterior(const Volume& image, double below, double fill) {
  const Grid& g = image.grid();
  Volume out = image;
  std::vector<char> seen(image.size(), 0);
  std::vector<std::size_t> stack;
  const auto push = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= g.dims[0] || j >= g.dims[1] || k >= g.dims[2]) return;
    const std::size_t id = g.index(i, j, k);
    if (seen[id] || image[id] >= below) return;
    seen[id] = 1;
    stack.push_back(id);
  };
  for (int i = 0; i < g.dims[0]; ++i) {
    for (int j = 0; j < g.dims[1]; ++j) {
      for (int k = 0; k < g.dims[2]; ++k) {
        if (i == 0 || j == 0 || k == 0 || i + 1 == g.dims[0] || j + 1 == g.dims[1] || k + 1 == g.dims[2]) push(i, j, k);
      }
    }
  }
  while (!stack.empty()) {
    const std::size_t id = stack.back();
    stack.pop_back();
    out[id] = static_cast<float>(fill);
    const auto [i, j, k] = g.unflatten(id);
    push(i - 1, j, k);
    push(i + 1, j, k);
    push(i, j - 1, k);
    push(i, j + 1, k);
    push(i, j, k - 1);
    push(i, j, k + 1);
  }
  return out;
}

std::vector<double> draw_coefficients(int min_degree, int max_degree, CounterRng rng) {
  // Variance per degree ~ 1/(l+1)^2, total mean square normalized to 1.
  double total = 0.0;
  for (int l = min_degree; l <= max_degree; ++l) total += (2 * l + 1) / ((l + 1.0) * (l + 1.0));
  std::vector<double> c(static_cast<std::size_t>((max_degree + 1) * (max_degree + 1)), 0.0);
  for (int l = min_degree; l <= max_degree; ++l) {
    const double sd = 1.0 / ((l + 1.0) * std::sqrt(total));
    for (int m = -l; m <= l; ++m) {
      const auto idx = static_cast<std::size_t>(l * l + l + m);
      c[idx] = sd * rng.normal(idx);
    }
  }
  return c;
}

double expand(const std::vector<double>& coeffs, const std::vector<double>& basis) {
  double s = 0.0;
  for (std::size_t i = 0; i < coeffs.size() && i < basis.size(); ++i) s += coeffs[i] * basis[i];
  return s;
}

}  // namespace

std::vector<double> real_spherical_harmonics(int max_degree, const Vec3& u) {
  const double theta = std::acos(std::clamp(u.z(), -1.0, 1.0));
  const double phi = std::atan2(u.y(), u.x());
  const double norm = std::sqrt(4.0 * std::numbers::pi);
  std::vector<double> y(static_cast<std::size_t>((max_degree + 1) * (max_degree + 1)));
  for (int l = 0; l <= max_degree; ++l) {
    for (int m = -l; m <= l; ++m) {
      double v;
      if (m == 0) {
        v = boost::math::spherical_harmonic_r(l, 0, theta, phi);
      } else if (m > 0) {
        v = std::numbers::sqrt2 * boost::math::spherical_harmonic_r(l, m, theta, phi);
      } else {
        v = std::numbers::sqrt2 * boost::math::spherical_harmonic_i(l, -m, theta, phi);
      }
      y[static_cast<std::size_t>(l * l + l + m)] = norm * v;
    }
  }
  return y;
}

void PhantomSpec::validate() const {
  if (!(inner_radius > 0.0) || !(outer_radius > inner_radius)) {
    throw ValidationError("phantom: need 0 < inner_radius < outer_radius");
  }
  if (min_degree < 0 || max_degree < min_degree || max_degree > 12) {
    throw ValidationError("phantom: degrees must satisfy 0 <= min_degree <= max_degree <= 12");
  }
  if (bump_amplitude < 0.0 || thickness_modulation < 0.0 || noise_sigma < 0.0 || bias_amplitude < 0.0 ||
      bias_amplitude >= 1.0 || !(bias_wavelength > 0.0)) {
    throw ValidationError("phantom: amplitudes must be non-negative (bias < 1), wavelength positive");
  }
  if (background_level == interior_level || background_level == ribbon_level || interior_level == ribbon_level) {
    throw ValidationError("phantom: intensity levels must be distinct");
  }
  if (subdivisions < 0 || subdivisions > 7) throw ValidationError("phantom: subdivisions out of range");
  const auto n = static_cast<std::size_t>((max_degree + 1) * (max_degree + 1));
  if ((!bump_coefficients.empty() && bump_coefficients.size() != n) ||
      (!thickness_coefficients.empty() && thickness_coefficients.size() != n)) {
    throw ValidationError("phantom: coefficient vectors must have (max_degree + 1)^2 entries");
  }
  grid.validate();
}

PhantomSpec PhantomSpec::resolved() const {
  validate();
  PhantomSpec s = *this;
  if (s.bump_coefficients.empty()) {
    s.bump_coefficients = draw_coefficients(min_degree, max_degree, CounterRng::derive(seed, "phantom-bump"));
  }
  if (s.thickness_coefficients.empty()) {
    s.thickness_coefficients =
        draw_coefficients(min_degree, max_degree, CounterRng::derive(seed, "phantom-thickness"));
  }
  return s;
}

Volume bias_field(const PhantomSpec& spec) {
  Volume bias(spec.grid, 1.0f);
  if (spec.bias_amplitude == 0.0) return bias;
  constexpr int kWaves = 4;
  const auto rng = CounterRng::derive(spec.seed, "phantom-bias");
  std::array<Vec3, kWaves> dir;
  std::array<double, kWaves> phase;
  for (int w = 0; w < kWaves; ++w) {
    Vec3 d(rng.normal(4 * w), rng.normal(4 * w + 1), rng.normal(4 * w + 2));
    dir[w] = d.normalized();
    phase[w] = 2.0 * std::numbers::pi * rng.uniform(8 * kWaves + w);
  }
  const Grid& g = spec.grid;
  for (std::size_t n = 0; n < bias.size(); ++n) {
    const auto [i, j, k] = g.unflatten(n);
    const Vec3 x = g.center(i, j, k);
    double s = 0.0;
    for (int w = 0; w < kWaves; ++w) {
      s += std::cos(2.0 * std::numbers::pi * dir[w].dot(x) / spec.bias_wavelength + phase[w]);
    }
    bias[n] = static_cast<float>(1.0 + spec.bias_amplitude * s / kWaves);
  }
  return bias;
}

Volume render_image(const PhantomSpec& spec, const geometry::ConditionSet& cond) {
  require_same_grid(spec.grid, cond.grid(), "phantom image");
  const Volume bias = bias_field(spec);
  const auto noise = CounterRng::derive(spec.seed, "phantom-noise");
  Volume image(spec.grid);
  for (std::size_t n = 0; n < image.size(); ++n) {
    double level;
    if (cond.ribbon[n] == 1.0f) {
      level = spec.ribbon_level;
    } else if (cond.s_c[n] <= 0.0f) {
      level = spec.interior_level;
    } else {
      level = spec.background_level;
    }
    double v = level * bias[n];
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.normal(n);
    image[n] = static_cast<float>(v);
  }
  return image;
}

PhantomCase generate(const PhantomSpec& input) {
  PhantomCase c;
  c.spec = input.resolved();
  const PhantomSpec& s = c.spec;
  const geometry::TriMesh sphere = geometry::make_icosphere(s.subdivisions, 1.0);
  c.white = sphere;
  c.pial = sphere;
  for (std::size_t i = 0; i < sphere.vertices.size(); ++i) {
    const Vec3& u = sphere.vertices[i];
    const auto y = real_spherical_harmonics(s.max_degree, u);
    const double r_white = s.inner_radius * (1.0 + s.bump_amplitude * expand(s.bump_coefficients, y));
    const double gap =
        (s.outer_radius - s.inner_radius) * (1.0 + s.thickness_modulation * std::tanh(expand(s.thickness_coefficients, y)));
    if (!(r_white > 0.0) || !(gap > 0.0)) {
      throw ValidationError("phantom: white surface meets or crosses the pial surface at vertex " +
                            std::to_string(i));
    }
    c.white.vertices[i] = r_white * u;
    c.pial.vertices[i] = (r_white + gap) * u;
  }
  c.conditions = geometry::build_conditions(c.white, c.pial, s.grid);
  c.image = render_image(s, c.conditions);
  return c;
}

PhantomSpec population_member(const PhantomSpec& base, std::uint64_t population_seed, std::size_t index) {
  PhantomSpec s = base;
  s.bump_coefficients.clear();
  s.thickness_coefficients.clear();
  s.seed = hash_combine(hash_combine(population_seed, hash_tag("phantom-case")), index);
  return s;
}

void to_json(nlohmann::json& j, const PhantomSpec& s) {
  j = nlohmann::json{
      {"inner_radius", s.inner_radius},
      {"outer_radius", s.outer_radius},
      {"min_degree", s.min_degree},
      {"max_degree", s.max_degree},
      {"bump_amplitude", s.bump_amplitude},
      {"thickness_modulation", s.thickness_modulation},
      {"bump_coefficients", s.bump_coefficients},
      {"thickness_coefficients", s.thickness_coefficients},
      {"subdivisions", s.subdivisions},
      {"background_level", s.background_level},
      {"interior_level", s.interior_level},
      {"ribbon_level", s.ribbon_level},
      {"noise_sigma", s.noise_sigma},
      {"bias_amplitude", s.bias_amplitude},
      {"bias_wavelength", s.bias_wavelength},
      {"grid",
       {{"dims", s.grid.dims},
        {"spacing", {s.grid.spacing.x(), s.grid.spacing.y(), s.grid.spacing.z()}},
        {"origin", {s.grid.origin.x(), s.grid.origin.y(), s.grid.origin.z()}}}},
      {"seed", s.seed},
  };
}

void from_json(const nlohmann::json& j, PhantomSpec& s) {
  PhantomSpec d;
  s.inner_radius = j.value("inner_radius", d.inner_radius);
  s.outer_radius = j.value("outer_radius", d.outer_radius);
  s.min_degree = j.value("min_degree", d.min_degree);
  s.max_degree = j.value("max_degree", d.max_degree);
  s.bump_amplitude = j.value("bump_amplitude", d.bump_amplitude);
  s.thickness_modulation = j.value("thickness_modulation", d.thickness_modulation);
  s.bump_coefficients = j.value("bump_coefficients", std::vector<double>{});
  s.thickness_coefficients = j.value("thickness_coefficients", std::vector<double>{});
  s.subdivisions = j.value("subdivisions", d.subdivisions);
  s.background_level = j.value("background_level", d.background_level);
  s.interior_level = j.value("interior_level", d.interior_level);
  s.ribbon_level = j.value("ribbon_level", d.ribbon_level);
  s.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  s.bias_amplitude = j.value("bias_amplitude", d.bias_amplitude);
  s.bias_wavelength = j.value("bias_wavelength", d.bias_wavelength);
  s.grid = d.grid;
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    s.grid.dims = g.at("dims").get<std::array<int, 3>>();
    const auto sp = g.at("spacing").get<std::array<double, 3>>();
    const auto og = g.at("origin").get<std::array<double, 3>>();
    s.grid.spacing = Vec3(sp[0], sp[1], sp[2]);
    s.grid.origin = Vec3(og[0], og[1], og[2]);
  }
  s.seed = j.value("seed", d.seed);
}

ExtractedSurfaces extract_surfaces(const Volume& image, const PhantomSpec& spec) {
  const double pial_iso = 0.5 * (spec.background_level + spec.ribbon_level);
  const auto pial_parts = geometry::connected_components(geometry::extract_isosurface(image, pial_iso));
  if (pial_parts.empty()) throw NumericalError("extract_surfaces: no pial iso-surface found");
  std::vector<double> areas;
  for (const auto& m : pial_parts) areas.push_back(geometry::total_area(m));
  ExtractedSurfaces out;
  out.pial = pial_parts[static_cast<std::size_t>(std::max_element(areas.begin(), areas.end()) - areas.begin())];

  const auto white_parts = geometry::connected_components(geometry::extract_isosurface(
      fill_exterior(image, pial_iso, spec.ribbon_level), 0.5 * (spec.interior_level + spec.ribbon_level)));
  double best = 0.0;
  for (const auto& m : white_parts) {
    const double a = geometry::total_area(m);
    if (a > best) {
      best = a;
      out.white = m;
    }
  }
  if (out.white.faces.empty()) throw NumericalError("extract_surfaces: no white iso-surface found");
  // The ribbon is the bright side of the white iso-surface; turn it outward.
  for (auto& f : out.white.faces) std::swap(f[1], f[2]);
  return out;
}

}  // namespace c2v::phantom
