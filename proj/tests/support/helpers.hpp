#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "c2v/common/rng.hpp"
#include "c2v/geometry/mesh.hpp"
#include "c2v/geometry/volume.hpp"

namespace c2v::test {

inline Volume random_volume(const Grid& g, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Volume v(g);
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(lo + (hi - lo) * rng.uniform(i));
  return v;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::vector<double> out(n);
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < n; ++i) out[i] = scale * rng.normal(i);
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("c2v_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace c2v::test
