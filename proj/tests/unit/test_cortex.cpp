#include <doctest.h>

#include <Eigen/Geometry>

#include "c2v/common/error.hpp"
#include "c2v/geometry/cortex.hpp"
#include "c2v/geometry/distance.hpp"
#include "c2v/geometry/surface_metrics.hpp"
#include "support/helpers.hpp"

using namespace c2v;
using namespace c2v::geometry;

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Vertices of a sheet at least `margin` away from its border.
std::vector<std::size_t> interior(const TriMesh& sheet, double size, double margin) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sheet.vertex_count(); ++i) {
    const Vec3& p = sheet.vertices[i];
    if (std::abs(p.x()) <= size / 2 - margin && std::abs(p.y()) <= size / 2 - margin) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST_CASE("midthickness") {
  const TriMesh inner = make_icosphere(3, 1.0);
  const TriMesh outer = make_icosphere(3, 2.0);
  CHECK(midthickness(inner, inner).vertices == inner.vertices);
  const TriMesh mid = midthickness(outer, inner);
  CHECK(mid.faces == outer.faces);
  for (const Vec3& p : mid.vertices) CHECK(p.norm() == doctest::Approx(1.5).epsilon(1e-12));
  CHECK_THROWS_AS(midthickness(outer, make_icosphere(2, 1.0)), ShapeMismatch);
}

TEST_CASE("thickness of parallel sheets equals their separation") {
  const TriMesh white = make_grid_sheet(10, 10, 10.0, 10.0, 0.0);
  const TriMesh pial = make_grid_sheet(10, 10, 10.0, 10.0, 1.7);
  const auto t = cortical_thickness(pial, white);
  for (std::size_t i : interior(white, 10.0, 1.0)) CHECK(std::abs(t[i] - 1.7) < 1e-9);
  for (double x : cortical_thickness(white, white)) CHECK(x == 0.0);
}

TEST_CASE("thickness of concentric spheres is close to the radial gap") {
  const auto t = cortical_thickness(make_icosphere(4, 2.0), make_icosphere(4, 1.0));
  for (double x : t) CHECK(std::abs(x - 1.0) < 0.03);
}

TEST_CASE("thickness is invariant under a rigid motion") {
  const TriMesh pial = make_icosphere(2, 2.0);
  TriMesh white = make_icosphere(2, 1.0);
  white.vertices[5] *= 1.1;
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const Vec3 shift(3.0, -1.0, 0.5);
  const auto a = cortical_thickness(pial, white);
  const auto b = cortical_thickness(transformed(pial, rot, shift), transformed(white, rot, shift));
  CHECK(test::max_abs_diff(a, b) < 1e-9);
}

TEST_CASE("atrophy examples") {
  const TriMesh white = make_icosphere(3, 1.0);
  const TriMesh pial = make_icosphere(3, 2.0);

  SUBCASE("zero delta is the identity") {
    const auto r = simulate_atrophy(pial, white, 0.0);
    CHECK(r.pial.vertices == pial.vertices);
    CHECK(r.pial.faces == pial.faces);
  }
  SUBCASE("requested thinning is recovered by the thickness oracle") {
    const auto before = mean_of(cortical_thickness(pial, white));
    const auto r = simulate_atrophy(pial, white, 0.3);
    const auto after = mean_of(cortical_thickness(r.pial, white));
    CHECK(std::abs((before - after) - 0.3) < 0.02);
    CHECK(r.clamped == 0);
  }
  SUBCASE("huge delta clamps near white matter and keeps clearance") {
    AtrophyOptions opt;
    opt.warn = false;
    const auto r = simulate_atrophy(pial, white, 10.0, opt);
    CHECK(r.all_clamped);
    const SignedDistance sw(white);
    for (const Vec3& p : r.pial.vertices) CHECK(sw(p) >= opt.step - 1e-12);
    for (double x : cortical_thickness(r.pial, white)) CHECK(x > 0.0);
  }
  SUBCASE("negative delta is rejected") { CHECK_THROWS_AS(simulate_atrophy(pial, white, -0.1), ValidationError); }
}

TEST_CASE("masked atrophy leaves unmasked vertices in place") {
  const TriMesh white = make_icosphere(4, 8.0);
  const TriMesh pial = make_icosphere(4, 11.0);
  AtrophyOptions opt;
  std::vector<int> region(pial.vertex_count());
  for (std::size_t i = 0; i < region.size(); ++i) region[i] = pial.vertices[i].x() >= 0.0;
  opt.region = region;
  const auto r = simulate_atrophy(pial, white, 0.3, opt);
  const auto before = cortical_thickness(pial, white);
  const auto after = cortical_thickness(r.pial, white);
  double in = 0.0, n_in = 0.0, out = 0.0, n_out = 0.0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region[i]) {
      in += before[i] - after[i];
      n_in += 1.0;
    } else {
      CHECK(r.pial.vertices[i] == pial.vertices[i]);
      out += before[i] - after[i];
      n_out += 1.0;
    }
  }
  // Border vertices still see moved faces through the white-to-pial half of
  // the thickness, so the bound applies to the unmasked mean.
  CHECK(std::abs(out / n_out) < 0.01);
  CHECK(std::abs(in / n_in - 0.3) < 0.03);
}

TEST_CASE("ASSD") {
  SUBCASE("identical meshes") {
    const TriMesh m = make_icosphere(3, 1.0);
    CHECK(assd(m, m, 5000, 1) < 1e-6);
  }
  SUBCASE("parallel sheets within 2 percent") {
    const TriMesh a = make_grid_sheet(40, 40, 100.0, 100.0, 0.0);
    const TriMesh b = make_grid_sheet(40, 40, 100.0, 100.0, 0.8);
    CHECK(std::abs(assd(a, b, 20000, 3) - 0.8) < 0.02 * 0.8);
  }
  SUBCASE("concentric spheres within 3 percent") {
    const TriMesh a = make_icosphere(5, 1.0);
    const TriMesh b = make_icosphere(5, 1.1);
    CHECK(std::abs(assd(a, b, 20000, 5) - 0.1) < 0.003);
  }
  SUBCASE("symmetric under swapped seeds") {
    const TriMesh a = make_icosphere(2, 1.0);
    const TriMesh b = transformed(make_icosphere(2, 1.2), Eigen::Matrix3d::Identity(), Vec3(0.1, 0, 0));
    CHECK(assd(a, b, 3000, 11, 12) == doctest::Approx(assd(b, a, 3000, 12, 11)).epsilon(1e-15));
  }
  SUBCASE("surface samples lie on the mesh and are seeded") {
    const TriMesh m = make_icosphere(2, 1.0);
    const auto p = sample_surface(m, 500, 9);
    CHECK(p == sample_surface(m, 500, 9));
    const PointMeshDistance q(m);
    for (const Vec3& x : p) CHECK(q.distance(x) < 1e-12);
  }
  SUBCASE("zero-area mesh is rejected") {
    TriMesh m;
    CHECK_THROWS_AS(assd(m, make_icosphere(1), 10, 1), ValidationError);
  }
}
