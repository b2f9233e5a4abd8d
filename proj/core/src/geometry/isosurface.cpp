#include "c2v/geometry/isosurface.hpp"

#include <algorithm>
#include <array>
#include <unordered_map>
#include <utility>

namespace c2v::geometry {
namespace {

// Cube corners as (di, dj, dk) bit patterns: corner c = (c>>2 & 1, c>>1 & 1, c & 1).
// Six tetrahedra sharing the main diagonal 0 -> 7.
constexpr std::array<std::array<int, 4>, 6> kTets = {{
    {0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7}, {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7},
}};

struct PairHash {
  std::size_t operator()(const std::pair<std::size_t, std::size_t>& p) const noexcept {
    return std::hash<std::size_t>()(p.first * 0x9e3779b97f4a7c15ull ^ p.second);
  }
};

}  // namespace

TriMesh extract_isosurface(const Volume& field, double iso) {
  const Grid& g = field.grid();
  TriMesh mesh;
  std::unordered_map<std::pair<std::size_t, std::size_t>, int, PairHash> edge_vertex;

  const auto crossing = [&](std::size_t a, std::size_t b) {
    const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    if (auto it = edge_vertex.find(key); it != edge_vertex.end()) return it->second;
    const auto [ia, ja, ka] = g.unflatten(key.first);
    const auto [ib, jb, kb] = g.unflatten(key.second);
    const double va = field[key.first];
    const double vb = field[key.second];
    // Keep crossings off the lattice points so no two edges share a vertex position.
    const double t = std::clamp((iso - va) / (vb - va), 1e-3, 1.0 - 1e-3);
    const Vec3 pa = g.center(ia, ja, ka);
    const Vec3 pb = g.center(ib, jb, kb);
    mesh.vertices.push_back(pa + t * (pb - pa));
    const int id = static_cast<int>(mesh.vertices.size()) - 1;
    edge_vertex.emplace(key, id);
    return id;
  };

  const auto emit = [&](int a, int b, int c, const Vec3& outward) {
    const Vec3& pa = mesh.vertices[a];
    const Vec3 n = (mesh.vertices[b] - pa).cross(mesh.vertices[c] - pa);
    if (n.squaredNorm() <= 1e-24 * g.min_spacing() * g.min_spacing() * g.min_spacing() * g.min_spacing()) return;
    if (n.dot(outward) < 0.0) std::swap(b, c);
    mesh.faces.push_back({a, b, c});
  };

  for (int i = 0; i + 1 < g.dims[0]; ++i) {
    for (int j = 0; j + 1 < g.dims[1]; ++j) {
      for (int k = 0; k + 1 < g.dims[2]; ++k) {
        std::array<std::size_t, 8> corner;
        int above = 0;
        for (int c = 0; c < 8; ++c) {
          corner[c] = g.index(i + ((c >> 2) & 1), j + ((c >> 1) & 1), k + (c & 1));
          above += field[corner[c]] > iso ? 1 : 0;
        }
        if (above == 0 || above == 8) continue;
        for (const auto& tet : kTets) {
          std::array<std::size_t, 4> in{}, out{};
          int n_in = 0;
          int n_out = 0;
          for (int v : tet) {
            if (field[corner[v]] > iso) {
              in[n_in++] = corner[v];
            } else {
              out[n_out++] = corner[v];
            }
          }
          if (n_in == 0 || n_out == 0) continue;
          // Direction from the inside vertices toward the outside ones.
          Vec3 c_in = Vec3::Zero();
          Vec3 c_out = Vec3::Zero();
          for (int a = 0; a < n_in; ++a) {
            const auto [x, y, z] = g.unflatten(in[a]);
            c_in += g.center(x, y, z);
          }
          for (int a = 0; a < n_out; ++a) {
            const auto [x, y, z] = g.unflatten(out[a]);
            c_out += g.center(x, y, z);
          }
          const Vec3 outward = c_out / n_out - c_in / n_in;
          if (n_in == 1 || n_out == 1) {
            const bool single_in = n_in == 1;
            const std::size_t apex = single_in ? in[0] : out[0];
            const auto& others = single_in ? out : in;
            emit(crossing(apex, others[0]), crossing(apex, others[1]), crossing(apex, others[2]), outward);
          } else {
            const int a = crossing(in[0], out[0]);
            const int b = crossing(in[0], out[1]);
            const int c = crossing(in[1], out[1]);
            const int d = crossing(in[1], out[0]);
            emit(a, b, c, outward);
            emit(a, c, d, outward);
          }
        }
      }
    }
  }
  return mesh;
}

}  // namespace c2v::geometry
