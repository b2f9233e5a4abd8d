#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "c2v/geometry/volume.hpp"

namespace c2v::metrics {

/// Returned by psnr() for identical inputs.
inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

/// 10 log10(range^2 / MSE).
double psnr(const Volume& a, const Volume& b, double data_range);

struct SsimOptions {
  int window = 7;  // odd cube edge >= 3, uniform weights
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean structural similarity over all fully contained window positions.
double ssim(const Volume& a, const Volume& b, double data_range, const SsimOptions& opt = {});

/// SSIM value for each valid window position (flattened, C order over the
/// (dims - window + 1) lattice).
std::vector<double> ssim_map(const Volume& a, const Volume& b, double data_range, const SsimOptions& opt = {});

/// max - min of the volume; 1 if the volume is constant.
double intensity_range(const Volume& v);

/// Mean SSIM of `generated` against n_refs references drawn without
/// replacement. References are put in a canonical (content-hash) order before
/// the seeded draw, so the result does not depend on the input order.
double mr_ssim(const Volume& generated, const std::vector<Volume>& references, int n_refs, std::uint64_t seed,
               std::optional<double> data_range = std::nullopt, const SsimOptions& opt = {});

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double data_range = 1.0;
  bool data_range_from_reference = true;
};

MetricReport evaluate(const Volume& generated, const Volume& reference,
                      std::optional<double> data_range = std::nullopt, const SsimOptions& opt = {});

}  // namespace c2v::metrics
