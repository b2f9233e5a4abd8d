#include <doctest.h>

#include <cmath>
#include <numbers>

#include "c2v/common/error.hpp"
#include "c2v/geometry/surface_metrics.hpp"
#include "c2v/phantom/phantom.hpp"

using namespace c2v;
using namespace c2v::phantom;

namespace {

PhantomSpec small_spec() {
  PhantomSpec s;
  s.grid = Grid::centered(24, 1.25);
  s.subdivisions = 3;
  s.seed = 9;
  return s;
}

}  // namespace

TEST_CASE("spherical harmonics are orthonormal in mean square") {
  constexpr int L = 3;
  constexpr int nt = 180, np = 360;
  const std::size_t n = (L + 1) * (L + 1);
  std::vector<double> gram(n * n, 0.0);
  double wsum = 0.0;
  for (int a = 0; a < nt; ++a) {
    const double theta = (a + 0.5) * std::numbers::pi / nt;
    const double w = std::sin(theta);
    for (int b = 0; b < np; ++b) {
      const double phi = (b + 0.5) * 2.0 * std::numbers::pi / np;
      const Vec3 u(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
      const auto y = real_spherical_harmonics(L, u);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) gram[i * n + j] += w * y[i] * y[j];
      wsum += w;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) CHECK(gram[i * n + j] / wsum == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-3).scale(1.0));
}

TEST_CASE("low-degree harmonics match closed forms up to sign") {
  const Vec3 u = Vec3(0.3, -0.5, 0.7).normalized();
  const auto y = real_spherical_harmonics(2, u);
  const double x = u.x(), yy = u.y(), z = u.z();
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(std::abs(y[1]) == doctest::Approx(std::sqrt(3.0) * std::abs(yy)));
  CHECK(std::abs(y[2]) == doctest::Approx(std::sqrt(3.0) * std::abs(z)));
  CHECK(std::abs(y[3]) == doctest::Approx(std::sqrt(3.0) * std::abs(x)));
  CHECK(std::abs(y[4]) == doctest::Approx(std::sqrt(15.0) * std::abs(x * yy)));
  CHECK(std::abs(y[6]) == doctest::Approx(std::sqrt(5.0) / 2.0 * std::abs(3 * z * z - 1)));
  CHECK(std::abs(y[8]) == doctest::Approx(std::sqrt(15.0) / 2.0 * std::abs(x * x - yy * yy)));
}

TEST_CASE("surfaces follow the radial model") {
  PhantomSpec s = small_spec();
  s.max_degree = 2;
  s.bump_coefficients.assign(9, 0.0);
  s.thickness_coefficients.assign(9, 0.0);
  s.bump_coefficients[2] = 1.0;       // l=1, m=0
  s.thickness_coefficients[3] = 0.5;  // l=1, m=1
  const auto pc = generate(s);
  for (std::size_t i = 0; i < pc.white.vertex_count(); ++i) {
    const Vec3 u = pc.white.vertices[i].normalized();
    const auto y = real_spherical_harmonics(2, u);
    const double rw = s.inner_radius * (1.0 + s.bump_amplitude * y[2]);
    const double gap = (s.outer_radius - s.inner_radius) * (1.0 + s.thickness_modulation * std::tanh(0.5 * y[3]));
    CHECK(pc.white.vertices[i].norm() == doctest::Approx(rw).epsilon(1e-12));
    CHECK(pc.pial.vertices[i].norm() == doctest::Approx(rw + gap).epsilon(1e-12));
    CHECK((pc.pial.vertices[i].normalized() - u).norm() < 1e-12);
  }
  CHECK(pc.white.faces == pc.pial.faces);
  geometry::validate_closed(pc.white);
  geometry::validate_closed(pc.pial);
}

TEST_CASE("generation is deterministic and seed dependent") {
  const auto a = generate(small_spec());
  const auto b = generate(small_spec());
  CHECK(a.image == b.image);
  CHECK(a.pial.vertices == b.pial.vertices);
  const auto c = generate(population_member(small_spec(), 1, 0));
  const auto d = generate(population_member(small_spec(), 1, 1));
  CHECK(c.spec.seed != d.spec.seed);
  CHECK(c.pial.vertices != d.pial.vertices);
  CHECK(population_member(small_spec(), 1, 1).seed == d.spec.seed);
}

TEST_CASE("image levels without noise or bias") {
  PhantomSpec s = small_spec();
  s.noise_sigma = 0.0;
  s.bias_amplitude = 0.0;
  const auto pc = generate(s);
  std::size_t counts[3] = {0, 0, 0};
  for (std::size_t n = 0; n < pc.image.size(); ++n) {
    const float v = pc.image[n];
    if (pc.conditions.ribbon[n] == 1.0f) {
      CHECK(v == static_cast<float>(s.ribbon_level));
      ++counts[2];
    } else if (pc.conditions.s_c[n] <= 0.0f) {
      CHECK(v == static_cast<float>(s.interior_level));
      ++counts[1];
    } else {
      CHECK(v == static_cast<float>(s.background_level));
      ++counts[0];
    }
  }
  for (auto c : counts) CHECK(c > 0);
}

TEST_CASE("bias field range and noise statistics") {
  PhantomSpec s = small_spec();
  s.bias_amplitude = 0.2;
  const Volume bias = bias_field(s);
  float lo = 10, hi = -10;
  for (float v : bias.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.8f - 1e-6f);
  CHECK(hi <= 1.2f + 1e-6f);
  CHECK(hi - lo > 0.01f);

  s.bias_amplitude = 0.0;
  s.noise_sigma = 0.05;
  const auto pc = generate(s);
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pc.image.size(); ++i) {
    if (pc.conditions.ribbon[i] == 1.0f || pc.conditions.s_c[i] <= 0.0f) continue;
    sum += pc.image[i];
    sq += double(pc.image[i]) * pc.image[i];
    ++n;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 4 * 0.05 / std::sqrt(double(n)));
  CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("surface extraction recovers the generating surfaces") {
  const auto pc = generate(small_spec());
  const auto ex = extract_surfaces(pc.image, pc.spec);
  const double spacing = pc.spec.grid.min_spacing();
  CHECK(geometry::assd(ex.pial, pc.pial, 3000, 1) < 0.5 * spacing);
  CHECK(geometry::assd(ex.white, pc.white, 3000, 2) < 0.5 * spacing);
}

TEST_CASE("spec json and validation") {
  const PhantomSpec s = small_spec().resolved();
  const nlohmann::json j = s;
  const PhantomSpec back = j.get<PhantomSpec>();
  CHECK(nlohmann::json(back) == j);
  CHECK(generate(back).image == generate(s).image);

  PhantomSpec bad = small_spec();
  bad.outer_radius = bad.inner_radius;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = small_spec();
  bad.interior_level = bad.ribbon_level;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = small_spec();
  bad.bump_coefficients = {1.0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = small_spec();
  bad.bump_amplitude = 2.0;
  bad.max_degree = 1;
  bad.bump_coefficients = {0.0, 0.0, 1.0, 0.0};
  CHECK_THROWS_AS(generate(bad), ValidationError);
}
