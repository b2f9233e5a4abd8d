#include "c2v/geometry/volume.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "c2v/common/binary_io.hpp"
#include "c2v/common/error.hpp"

namespace c2v {

void Grid::validate() const {
  for (int d : dims) {
    if (d <= 0) throw ValidationError("grid dims must be positive");
  }
  for (int a = 0; a < 3; ++a) {
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw ValidationError("grid spacing must be positive and finite");
    }
    if (!std::isfinite(origin[a])) throw ValidationError("grid origin must be finite");
  }
}

Grid Grid::cube(int n, double lo, double hi) {
  Grid g;
  g.dims = {n, n, n};
  const double h = n > 1 ? (hi - lo) / (n - 1) : 1.0;
  g.spacing = Vec3::Constant(h);
  g.origin = Vec3::Constant(lo);
  g.validate();
  return g;
}

Grid Grid::centered(int n, double spacing) {
  Grid g;
  g.dims = {n, n, n};
  g.spacing = Vec3::Constant(spacing);
  g.origin = Vec3::Constant(-0.5 * (n - 1) * spacing);
  g.validate();
  return g;
}

Volume::Volume(const Grid& grid, float fill) : grid_(grid) {
  grid_.validate();
  data_.assign(grid_.voxel_count(), fill);
}

Volume::Volume(const Grid& grid, std::vector<float> data) : grid_(grid), data_(std::move(data)) {
  grid_.validate();
  if (data_.size() != grid_.voxel_count()) {
    throw ValidationError("volume data length " + std::to_string(data_.size()) + " does not match dims (" +
                          std::to_string(grid_.voxel_count()) + ")");
  }
}

void Volume::validate() const {
  grid_.validate();
  if (data_.size() != grid_.voxel_count()) throw ValidationError("volume data length mismatch");
  for (float v : data_) {
    if (!std::isfinite(v)) throw ValidationError("volume contains non-finite values");
  }
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw ShapeMismatch(std::string(what) + ": volume geometry mismatch");
}

void write_volume(std::ostream& os, const Volume& v) {
  io::write_magic(os, "C2VX");
  io::write_le<std::uint32_t>(os, kVolumeFormatVersion);
  const Grid& g = v.grid();
  for (int d : g.dims) io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  for (int a = 0; a < 3; ++a) io::write_le<double>(os, g.spacing[a]);
  for (int a = 0; a < 3; ++a) io::write_le<double>(os, g.origin[a]);
  io::write_le<std::uint8_t>(os, 0);
  io::write_le_array<float>(os, v.data());
}

Volume read_volume(std::istream& is) {
  io::expect_magic(is, "C2VX", "volume");
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != kVolumeFormatVersion) {
    throw ValidationError("volume: unsupported format version " + std::to_string(version));
  }
  Grid g;
  for (int& d : g.dims) {
    const auto n = io::read_le<std::uint32_t>(is);
    if (n == 0 || n > (1u << 16)) throw ValidationError("volume: dims out of range");
    d = static_cast<int>(n);
  }
  for (int a = 0; a < 3; ++a) g.spacing[a] = io::read_le<double>(is);
  for (int a = 0; a < 3; ++a) g.origin[a] = io::read_le<double>(is);
  const auto dtype = io::read_le<std::uint8_t>(is);
  if (dtype != 0) throw ValidationError("volume: unsupported dtype tag " + std::to_string(dtype));
  g.validate();
  std::vector<float> data(g.voxel_count());
  io::read_le_array<float>(is, data);
  return Volume(g, std::move(data));
}

void save_volume(const std::filesystem::path& path, const Volume& v) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_volume(os, v);
  if (!os) throw Error("failed writing " + path.string());
}

Volume load_volume(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path.string());
  return read_volume(is);
}

}  // namespace c2v
