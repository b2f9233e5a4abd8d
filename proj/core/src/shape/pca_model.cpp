#include "c2v/shape/pca_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/SVD>

#include "c2v/common/binary_io.hpp"
#include "c2v/common/error.hpp"

namespace c2v::shape {
namespace {

constexpr std::uint32_t kModelVersion = 1;

void require_dimension(const PcaModel& model, Eigen::Index n, const char* what) {
  if (n != static_cast<Eigen::Index>(model.dimension())) {
    throw ShapeMismatch(std::string(what) + ": dimension mismatch");
  }
}

struct CenteredData {
  Eigen::MatrixXd centered;  // n x d
  Eigen::VectorXd mean;
};

CenteredData center(const std::vector<geometry::TriMesh>& samples) {
  if (samples.size() < 2) throw ValidationError("pca_fit: need at least 2 samples");
  for (const auto& s : samples) {
    geometry::require_correspondence(samples.front(), s, "pca_fit");
    if (!s.has_thickness()) throw ValidationError("pca_fit: samples need a thickness channel");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index d = static_cast<Eigen::Index>(4 * samples.front().vertex_count());
  CenteredData c{Eigen::MatrixXd(n, d), Eigen::VectorXd::Zero(d)};
  for (Eigen::Index i = 0; i < n; ++i) c.centered.row(i) = flatten(samples[i]).transpose();
  c.mean = c.centered.colwise().mean().transpose();
  c.centered.rowwise() -= c.mean.transpose();
  return c;
}

}  // namespace

Eigen::VectorXd flatten(const geometry::TriMesh& sample) {
  const std::size_t v = sample.vertex_count();
  if (sample.thickness.size() != v) throw ValidationError("flatten: sample needs a thickness channel");
  Eigen::VectorXd x(static_cast<Eigen::Index>(4 * v));
  for (std::size_t i = 0; i < v; ++i) {
    for (int a = 0; a < 3; ++a) x[static_cast<Eigen::Index>(a * v + i)] = sample.vertices[i][a];
    x[static_cast<Eigen::Index>(3 * v + i)] = sample.thickness[i];
  }
  return x;
}

geometry::TriMesh unflatten(const Eigen::VectorXd& x, const std::vector<geometry::Face>& faces) {
  if (x.size() % 4 != 0) throw ShapeMismatch("unflatten: length not a multiple of 4");
  const auto v = static_cast<std::size_t>(x.size() / 4);
  geometry::TriMesh m;
  m.faces = faces;
  m.vertices.resize(v);
  m.thickness.resize(v);
  for (std::size_t i = 0; i < v; ++i) {
    for (int a = 0; a < 3; ++a) m.vertices[i][a] = x[static_cast<Eigen::Index>(a * v + i)];
    m.thickness[i] = x[static_cast<Eigen::Index>(3 * v + i)];
  }
  return m;
}

double PcaModel::explained_variance_ratio() const {
  if (!(total_variance > 0.0)) return 1.0;
  return variances.sum() / total_variance;
}

PcaModel pca_fit(const std::vector<geometry::TriMesh>& samples, std::size_t k) {
  auto data = center(samples);
  const auto n = static_cast<std::size_t>(data.centered.rows());
  const auto d = static_cast<std::size_t>(data.centered.cols());
  if (k < 1 || k > std::min(n - 1, d)) {
    throw ValidationError("pca_fit: k must be in [1, min(n - 1, dim)] = [1, " +
                          std::to_string(std::min(n - 1, d)) + "]");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(data.centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  PcaModel model;
  model.vertex_count = samples.front().vertex_count();
  model.mean = data.mean;
  model.faces = samples.front().faces;
  const auto kk = static_cast<Eigen::Index>(k);
  model.basis = svd.matrixV().leftCols(kk).transpose();
  model.variances = sv.head(kk).array().square() / static_cast<double>(n - 1);
  model.total_variance = sv.array().square().sum() / static_cast<double>(n - 1);
  for (Eigen::Index r = 0; r < kk; ++r) {
    Eigen::Index arg = 0;
    model.basis.row(r).cwiseAbs().maxCoeff(&arg);
    if (model.basis(r, arg) < 0.0) model.basis.row(r) *= -1.0;
  }
  return model;
}

std::size_t components_for_variance(const std::vector<geometry::TriMesh>& samples, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("variance fraction must be in (0, 1]");
  const auto data = center(samples);
  const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(data.centered).singularValues();
  const Eigen::VectorXd var = sv.array().square();
  const double total = var.sum();
  const auto max_k = std::min<std::size_t>(samples.size() - 1, static_cast<std::size_t>(data.centered.cols()));
  if (!(total > 0.0)) return 1;
  double acc = 0.0;
  for (std::size_t k = 1; k <= max_k; ++k) {
    acc += var[static_cast<Eigen::Index>(k - 1)];
    if (acc / total >= fraction) return k;
  }
  return max_k;
}

Eigen::VectorXd embed_flat(const PcaModel& model, const Eigen::VectorXd& x) {
  require_dimension(model, x.size(), "embed");
  return model.basis * (x - model.mean);
}

Eigen::VectorXd embed(const PcaModel& model, const geometry::TriMesh& sample) {
  if (sample.vertex_count() != model.vertex_count) throw ShapeMismatch("embed: vertex count mismatch");
  return embed_flat(model, flatten(sample));
}

Eigen::VectorXd invert_flat(const PcaModel& model, const Eigen::VectorXd& e) {
  if (e.size() != static_cast<Eigen::Index>(model.components())) throw ShapeMismatch("invert: latent size mismatch");
  return model.mean + model.basis.transpose() * e;
}

geometry::TriMesh invert(const PcaModel& model, const Eigen::VectorXd& e) {
  return unflatten(invert_flat(model, e), model.faces);
}

Eigen::VectorXd slerp_sample(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2, double phi, SlerpRadius radius) {
  if (e1.size() != e2.size()) throw ShapeMismatch("slerp: latent size mismatch");
  if (!(phi >= 0.0 && phi <= 1.0)) throw ValidationError("slerp: phi must be in [0, 1]");
  const double n1 = e1.norm();
  const double n2 = e2.norm();
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw ValidationError("slerp: latent vectors must be nonzero");
  if (phi == 0.0) return e1;
  const double r = radius == SlerpRadius::kFirst ? n1 : (1.0 - phi) * n1 + phi * n2;
  const Eigen::VectorXd u1 = e1 / n1;
  const Eigen::VectorXd u2 = e2 / n2;
  const double beta = std::acos(std::clamp(u1.dot(u2), -1.0, 1.0));
  if (beta < 1e-6) return r * u1;
  if (std::numbers::pi - beta < 1e-6) throw ValidationError("slerp: antipodal latent vectors");
  const double sb = std::sin(beta);
  return r * ((std::sin((1.0 - phi) * beta) / sb) * u1 + (std::sin(phi * beta) / sb) * u2);
}

Eigen::VectorXd lerp_sample(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2, double phi) {
  if (e1.size() != e2.size()) throw ShapeMismatch("lerp: latent size mismatch");
  return (1.0 - phi) * e1 + phi * e2;
}

double mahalanobis(const PcaModel& model, const Eigen::VectorXd& e) {
  if (e.size() != static_cast<Eigen::Index>(model.components())) {
    throw ShapeMismatch("mahalanobis: latent size mismatch");
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    if (model.variances[i] > 0.0) s += e[i] * e[i] / model.variances[i];
  }
  return std::sqrt(s);
}

FilterResult outlier_filter(const PcaModel& model, const std::vector<geometry::TriMesh>& samples,
                            double per_component_threshold) {
  FilterResult r;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Eigen::VectorXd e = embed(model, samples[i]);
    if ((e.array().abs() > per_component_threshold).any()) {
      r.dropped.push_back(i);
    } else {
      r.retained.push_back(i);
    }
  }
  return r;
}

void save_model(const std::filesystem::path& path, const PcaModel& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  io::write_magic(os, "C2PC");
  io::write_le<std::uint32_t>(os, kModelVersion);
  io::write_le<std::uint32_t>(os, kFlatteningXyzT);
  io::write_le<std::uint64_t>(os, m.vertex_count);
  io::write_le<std::uint64_t>(os, m.components());
  io::write_le<std::uint64_t>(os, m.faces.size());
  io::write_le<double>(os, m.total_variance);
  io::write_le_array<double>(os, std::span<const double>(m.mean.data(), static_cast<std::size_t>(m.mean.size())));
  io::write_le_array<double>(os, std::span<const double>(m.variances.data(),
                                                          static_cast<std::size_t>(m.variances.size())));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = m.basis;
  io::write_le_array<double>(os, std::span<const double>(rows.data(), static_cast<std::size_t>(rows.size())));
  for (const auto& f : m.faces) {
    for (int idx : f) io::write_le<std::int32_t>(os, idx);
  }
  if (!os) throw Error("failed writing " + path.string());
}

PcaModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path.string());
  io::expect_magic(is, "C2PC", "shape model");
  if (const auto v = io::read_le<std::uint32_t>(is); v != kModelVersion) {
    throw ValidationError("shape model: unsupported version " + std::to_string(v));
  }
  if (const auto tag = io::read_le<std::uint32_t>(is); tag != kFlatteningXyzT) {
    throw ValidationError("shape model: unknown flattening order " + std::to_string(tag));
  }
  PcaModel m;
  m.vertex_count = io::read_le<std::uint64_t>(is);
  const auto k = io::read_le<std::uint64_t>(is);
  const auto nf = io::read_le<std::uint64_t>(is);
  if (m.vertex_count == 0 || m.vertex_count > (1u << 24) || k == 0 || k > 4 * m.vertex_count || nf > (1u << 26)) {
    throw ValidationError("shape model: header out of range");
  }
  m.total_variance = io::read_le<double>(is);
  const auto d = static_cast<Eigen::Index>(4 * m.vertex_count);
  m.mean.resize(d);
  io::read_le_array<double>(is, std::span<double>(m.mean.data(), static_cast<std::size_t>(d)));
  m.variances.resize(static_cast<Eigen::Index>(k));
  io::read_le_array<double>(is, std::span<double>(m.variances.data(), k));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(static_cast<Eigen::Index>(k), d);
  io::read_le_array<double>(is, std::span<double>(rows.data(), static_cast<std::size_t>(rows.size())));
  m.basis = rows;
  m.faces.resize(nf);
  for (auto& f : m.faces) {
    for (int& idx : f) {
      idx = io::read_le<std::int32_t>(is);
      if (idx < 0 || static_cast<std::uint64_t>(idx) >= m.vertex_count) {
        throw ValidationError("shape model: face index out of range");
      }
    }
  }
  return m;
}

}  // namespace c2v::shape
