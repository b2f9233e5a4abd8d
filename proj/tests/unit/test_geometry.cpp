#include <doctest.h>

#include <fstream>
#include <queue>
#include <sstream>

#include "c2v/common/error.hpp"
#include "c2v/geometry/distance.hpp"
#include "c2v/geometry/isosurface.hpp"
#include "c2v/geometry/mesh.hpp"
#include "c2v/geometry/volume.hpp"
#include "support/helpers.hpp"

using namespace c2v;
using namespace c2v::geometry;

namespace {

void write_file(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

const char* kTetra =
    "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n"
    "f 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";

// Brute-force point-to-mesh distance over every triangle.
double brute_distance(const TriMesh& m, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Face& f : m.faces) {
    const auto cp = closest_point_on_triangle(p, m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
    best = std::min(best, (cp.point - p).norm());
  }
  return best;
}

}  // namespace

TEST_CASE("tetrahedron OBJ loads as the smallest closed mesh") {
  const auto dir = test::scratch_dir("tetra");
  write_file(dir / "t.obj", kTetra);
  const TriMesh m = load_mesh(dir / "t.obj");
  CHECK(m.vertex_count() == 4);
  CHECK(m.face_count() == 4);
  CHECK_NOTHROW(validate_closed(m));
  CHECK(signed_distance(m, Vec3(0.1, 0.1, 0.1)) < 0.0);
}

TEST_CASE("OBJ face index 0 is out of range") {
  const auto dir = test::scratch_dir("zero_index");
  write_file(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
  try {
    load_mesh(dir / "bad.obj");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("index out of range") != std::string::npos);
  }
}

TEST_CASE("malformed OBJ line reports its line number") {
  const auto dir = test::scratch_dir("malformed");
  write_file(dir / "bad.obj", "v 0 0 0\nv 1 zero 0\n");
  try {
    load_mesh(dir / "bad.obj");
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("open patch is rejected for signed distance") {
  const TriMesh sheet = make_grid_sheet(2, 2, 1.0, 1.0, 0.0);
  CHECK_THROWS_AS(validate_closed(sheet), TopologyError);
  CHECK_THROWS_AS(SignedDistance{sheet}, TopologyError);
}

TEST_CASE("mesh round-trips through OBJ and thickness sidecar") {
  const auto dir = test::scratch_dir("roundtrip");
  TriMesh m = make_icosphere(2, 1.3);
  m.thickness.assign(m.vertex_count(), 0.0);
  for (std::size_t i = 0; i < m.thickness.size(); ++i) m.thickness[i] = 0.1 * static_cast<double>(i) / 3.0;
  save_mesh(dir / "m.obj", m);
  const TriMesh r = load_mesh(dir / "m.obj");
  CHECK(r.vertices == m.vertices);
  CHECK(r.faces == m.faces);
  CHECK(r.thickness == m.thickness);
}

TEST_CASE("volume binary format round-trips and rejects bad headers") {
  Grid g;
  g.dims = {3, 4, 5};
  g.spacing = Vec3(0.5, 1.0, 2.0);
  g.origin = Vec3(-1.0, 0.25, 3.0);
  const Volume v = test::random_volume(g, 4);
  std::stringstream ss;
  write_volume(ss, v);
  CHECK(read_volume(ss) == v);

  std::string bytes;
  {
    std::stringstream s2;
    write_volume(s2, v);
    bytes = s2.str();
  }
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream s3(bad_magic);
  CHECK_THROWS_AS(read_volume(s3), ValidationError);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  std::stringstream s4(bad_version);
  CHECK_THROWS_AS(read_volume(s4), ValidationError);
  std::stringstream s5(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_volume(s5), ValidationError);
}

TEST_CASE("signed distance of the unit icosphere") {
  const TriMesh sphere = make_icosphere(4, 1.0);
  const SignedDistance sdf(sphere);
  CHECK(sdf(Vec3::Zero()) == doctest::Approx(-1.0).epsilon(1e-2));
  CHECK(sdf(Vec3(3, 0, 0)) == doctest::Approx(2.0).epsilon(1e-2));
  CHECK(sdf(sphere.vertices[17]) == 0.0);
}

TEST_CASE("sign flips exactly once along rays through a convex mesh") {
  const TriMesh sphere = make_icosphere(3, 1.0);
  const SignedDistance sdf(sphere);
  for (int r = 0; r < 20; ++r) {
    const auto d = test::random_vector(3, 100 + r);
    const Vec3 dir = Vec3(d[0], d[1], d[2]).normalized();
    int flips = 0;
    double prev = sdf(Vec3::Zero());
    for (int i = 1; i <= 300; ++i) {
      const double cur = sdf(dir * (0.01 * i));
      if ((prev <= 0.0) != (cur <= 0.0)) ++flips;
      prev = cur;
    }
    CHECK(flips == 1);
  }
}

TEST_CASE("BVH distance equals brute force") {
  const TriMesh m = transformed(make_icosphere(2, 2.0), Eigen::Matrix3d::Identity(), Vec3(0.3, -0.2, 0.1));
  const PointMeshDistance q(m);
  for (int i = 0; i < 200; ++i) {
    const auto d = test::random_vector(3, 500 + i, 2.0);
    const Vec3 p(d[0], d[1], d[2]);
    CHECK(q.distance(p) == doctest::Approx(brute_distance(m, p)).epsilon(1e-12));
  }
}

TEST_CASE("SDF grid matches per-point calls and has one zero-crossing shell") {
  const TriMesh sphere = make_icosphere(3, 1.0);
  const SignedDistance sdf(sphere);
  const Grid g = Grid::cube(33, -2.0, 2.0);
  const Volume v = sample_sdf_grid(sdf, g);
  CHECK(v.at(16, 16, 16) == doctest::Approx(-1.0).epsilon(1e-2));
  for (std::size_t i = 0; i < v.size(); i += 97) {
    const auto [a, b, c] = g.unflatten(i);
    CHECK(v[i] == static_cast<float>(sdf(g.center(a, b, c))));
  }

  // Voxels with a sign change to a face neighbour, grouped by 26-connectivity.
  std::vector<char> shell(v.size(), 0);
  for (int i = 0; i < 33; ++i)
    for (int j = 0; j < 33; ++j)
      for (int k = 0; k < 33; ++k) {
        const bool in = v.at(i, j, k) <= 0.0f;
        const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& d : nb) {
          const int a = i + d[0], b = j + d[1], c = k + d[2];
          if (a < 0 || b < 0 || c < 0 || a >= 33 || b >= 33 || c >= 33) continue;
          if ((v.at(a, b, c) <= 0.0f) != in) shell[g.index(i, j, k)] = 1;
        }
      }
  std::vector<char> seen(v.size(), 0);
  int components = 0;
  for (std::size_t s = 0; s < v.size(); ++s) {
    if (!shell[s] || seen[s]) continue;
    ++components;
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const auto [i, j, k] = g.unflatten(q.front());
      q.pop();
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj)
          for (int dk = -1; dk <= 1; ++dk) {
            const int a = i + di, b = j + dj, c = k + dk;
            if (a < 0 || b < 0 || c < 0 || a >= 33 || b >= 33 || c >= 33) continue;
            const std::size_t n = g.index(a, b, c);
            if (shell[n] && !seen[n]) {
              seen[n] = 1;
              q.push(n);
            }
          }
    }
  }
  CHECK(components == 1);
}

TEST_CASE("grid outside the bounding box is all positive") {
  const TriMesh sphere = make_icosphere(2, 1.0);
  Grid g = Grid::cube(8, 3.0, 5.0);
  const Volume v = sample_sdf_grid(sphere, g);
  CHECK(std::all_of(v.data().begin(), v.data().end(), [](float x) { return x > 0.0f; }));
}

TEST_CASE("isosurface of a sphere SDF is a closed sphere-like surface") {
  const Grid g = Grid::cube(41, -2.0, 2.0);
  Volume f(g);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto [a, b, c] = g.unflatten(i);
    f[i] = static_cast<float>(g.center(a, b, c).norm() - 1.2);
  }
  const TriMesh m = extract_isosurface(f, 0.0);
  CHECK_NOTHROW(validate_closed(m));
  for (const Vec3& p : m.vertices) CHECK(std::abs(p.norm() - 1.2) < 0.01);
  // Triangles face away from f > iso: inward for an SDF, outward for its negation.
  CHECK(signed_distance(m, Vec3::Zero()) > 0.0);
  Volume neg = f;
  for (auto& v : neg.storage()) v = -v;
  CHECK(signed_distance(extract_isosurface(neg, 0.0), Vec3::Zero()) < 0.0);
  CHECK(connected_components(m).size() == 1);
}

TEST_CASE("connected components split disjoint spheres") {
  const TriMesh a = make_icosphere(1, 1.0);
  const TriMesh b = make_icosphere(1, 0.5, Vec3(5, 0, 0));
  TriMesh both = a;
  const int off = static_cast<int>(a.vertex_count());
  both.vertices.insert(both.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (Face f : b.faces) both.faces.push_back({f[0] + off, f[1] + off, f[2] + off});
  const auto comps = connected_components(both);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].vertices == a.vertices);
  CHECK(comps[1].vertices == b.vertices);
}
