#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace c2v {

using Vec3 = Eigen::Vector3d;

/// Sampling lattice of a volume. Voxel (i, j, k) has its center at
/// origin + (i * spacing.x, j * spacing.y, k * spacing.z); the flat index is
/// (i * dims[1] + j) * dims[2] + k.
struct Grid {
  std::array<int, 3> dims{1, 1, 1};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();

  std::size_t voxel_count() const noexcept {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  std::size_t index(int i, int j, int k) const noexcept {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(dims[1]) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims[2]) +
           static_cast<std::size_t>(k);
  }

  std::array<int, 3> unflatten(std::size_t flat) const noexcept {
    const auto k = static_cast<int>(flat % static_cast<std::size_t>(dims[2]));
    flat /= static_cast<std::size_t>(dims[2]);
    const auto j = static_cast<int>(flat % static_cast<std::size_t>(dims[1]));
    return {static_cast<int>(flat / static_cast<std::size_t>(dims[1])), j, k};
  }

  Vec3 center(int i, int j, int k) const noexcept {
    return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
  }

  double min_spacing() const noexcept { return spacing.minCoeff(); }

  /// Throws ValidationError on non-positive dims/spacing or non-finite values.
  void validate() const;

  /// Cubic grid of `n` voxels per axis covering [lo, hi]^3 with voxel centers
  /// on both ends.
  static Grid cube(int n, double lo, double hi);

  /// Cubic grid of `n` voxels per axis with the given spacing, centered at 0.
  static Grid centered(int n, double spacing);

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    return a.dims == b.dims && a.spacing == b.spacing && a.origin == b.origin;
  }
};

/// Dense scalar field on a Grid (single precision payload).
class Volume {
 public:
  Volume() = default;
  explicit Volume(const Grid& grid, float fill = 0.0f);
  Volume(const Grid& grid, std::vector<float> data);

  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::vector<float>& storage() noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }
  float& at(int i, int j, int k) noexcept { return data_[grid_.index(i, j, k)]; }
  float at(int i, int j, int k) const noexcept { return data_[grid_.index(i, j, k)]; }

  /// Throws ValidationError unless every value is finite.
  void validate() const;

  friend bool operator==(const Volume& a, const Volume& b) noexcept {
    return a.grid_ == b.grid_ && a.data_ == b.data_;
  }

 private:
  Grid grid_;
  std::vector<float> data_;
};

/// Throws ShapeMismatch if the two grids differ.
void require_same_grid(const Grid& a, const Grid& b, const char* what);

// Binary format: magic "C2VX", u32 version (1), 3 x u32 dims, 3 x f64
// spacing, 3 x f64 origin, u8 dtype (0 = f32), f32 payload in C order.
inline constexpr std::uint32_t kVolumeFormatVersion = 1;

void write_volume(std::ostream& os, const Volume& v);
Volume read_volume(std::istream& is);
void save_volume(const std::filesystem::path& path, const Volume& v);
Volume load_volume(const std::filesystem::path& path);

}  // namespace c2v
