#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "c2v/geometry/mesh.hpp"

namespace c2v::shape {

/// Flattening of a midthickness mesh with thickness channel:
/// [x_0..x_{V-1}, y_0..y_{V-1}, z_0..z_{V-1}, t_0..t_{V-1}].
inline constexpr std::uint32_t kFlatteningXyzT = 1;

Eigen::VectorXd flatten(const geometry::TriMesh& sample);
geometry::TriMesh unflatten(const Eigen::VectorXd& x, const std::vector<geometry::Face>& faces);

/// Linear shape model over flattened (midthickness, thickness) samples.
struct PcaModel {
  std::size_t vertex_count = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;       // k x 4V, orthonormal rows
  Eigen::VectorXd variances;   // k, non-increasing
  double total_variance = 0.0; // trace of the sample covariance
  std::vector<geometry::Face> faces;

  std::size_t components() const { return static_cast<std::size_t>(basis.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(mean.size()); }
  /// Fraction of the total variance captured by the retained components.
  double explained_variance_ratio() const;
};

/// Thin SVD of the centered data matrix. The largest-magnitude entry of every
/// component is made positive.
PcaModel pca_fit(const std::vector<geometry::TriMesh>& samples, std::size_t k);

/// Smallest k whose explained variance ratio reaches `fraction`.
std::size_t components_for_variance(const std::vector<geometry::TriMesh>& samples, double fraction);

Eigen::VectorXd embed(const PcaModel& model, const geometry::TriMesh& sample);
Eigen::VectorXd embed_flat(const PcaModel& model, const Eigen::VectorXd& x);
geometry::TriMesh invert(const PcaModel& model, const Eigen::VectorXd& e);
Eigen::VectorXd invert_flat(const PcaModel& model, const Eigen::VectorXd& e);

enum class SlerpRadius { kFirst, kInterpolated };

/// Great-circle interpolation between the directions of e1 and e2 with radius
/// |e1| (or the linear blend of |e1| and |e2|). Nearly parallel inputs return
/// a copy of e1 rescaled to the radius; antipodal inputs are rejected.
Eigen::VectorXd slerp_sample(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2, double phi,
                             SlerpRadius radius = SlerpRadius::kFirst);

Eigen::VectorXd lerp_sample(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2, double phi);

/// sqrt(sum e_i^2 / var_i) over components with positive variance.
double mahalanobis(const PcaModel& model, const Eigen::VectorXd& e);

struct FilterResult {
  std::vector<std::size_t> retained;
  std::vector<std::size_t> dropped;
};

/// Drops every sample with |e_i| > threshold for some component i.
FilterResult outlier_filter(const PcaModel& model, const std::vector<geometry::TriMesh>& samples,
                            double per_component_threshold);

// Binary: magic "C2PC", u32 version, u32 flattening tag, u64 V, u64 k,
// u64 face count, f64 total variance, f64 mean[4V], f64 variances[k],
// f64 basis[k * 4V] row-major, i32 faces[3F].
void save_model(const std::filesystem::path& path, const PcaModel& model);
PcaModel load_model(const std::filesystem::path& path);

}  // namespace c2v::shape
