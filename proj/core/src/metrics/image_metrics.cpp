#include "c2v/metrics/image_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <cstring>
#include <numeric>
#include <string>

#include "c2v/common/error.hpp"
#include "c2v/common/parallel.hpp"
#include "c2v/common/rng.hpp"

namespace c2v::metrics {
namespace {

// Box sums of `src` over window^3 neighbourhoods, separably along each axis.
// Output dims are dims - window + 1.
std::vector<double> box_sum(const std::vector<double>& src, std::array<int, 3> dims, int w) {
  std::vector<double> cur = src;
  for (int axis = 0; axis < 3; ++axis) {
    std::array<int, 3> out_dims = dims;
    out_dims[axis] = dims[axis] - w + 1;
    std::vector<double> out(static_cast<std::size_t>(out_dims[0]) * out_dims[1] * out_dims[2]);
    for (int i = 0; i < out_dims[0]; ++i) {
      for (int j = 0; j < out_dims[1]; ++j) {
        for (int k = 0; k < out_dims[2]; ++k) {
          double s = 0.0;
          for (int o = 0; o < w; ++o) {
            std::array<int, 3> p{i, j, k};
            p[axis] += o;
            s += cur[(static_cast<std::size_t>(p[0]) * dims[1] + p[1]) * dims[2] + p[2]];
          }
          out[(static_cast<std::size_t>(i) * out_dims[1] + j) * out_dims[2] + k] = s;
        }
      }
    }
    cur = std::move(out);
    dims = out_dims;
  }
  return cur;
}

std::uint64_t content_hash(const Volume& v) {
  std::uint64_t h = 0x9e3779b97f4a7c15ull;
  for (float f : v.data()) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    h = hash_combine(h, bits);
  }
  return h;
}

}  // namespace

double psnr(const Volume& a, const Volume& b, double data_range) {
  require_same_grid(a.grid(), b.grid(), "psnr");
  if (!(data_range > 0.0)) throw ValidationError("psnr: data_range must be positive");
  std::vector<double> sq(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    const double d = static_cast<double>(a[n]) - b[n];
    sq[n] = d * d;
  }
  const double mse = pairwise_sum(sq) / static_cast<double>(sq.size());
  if (mse == 0.0) return kPsnrInfinity;
  return 10.0 * std::log10(data_range * data_range / mse);
}

std::vector<double> ssim_map(const Volume& a, const Volume& b, double data_range, const SsimOptions& opt) {
  require_same_grid(a.grid(), b.grid(), "ssim");
  if (opt.window < 3 || opt.window % 2 == 0) throw ValidationError("ssim: window must be odd and at least 3");
  const auto dims = a.grid().dims;
  if (opt.window > *std::min_element(dims.begin(), dims.end())) {
    throw ValidationError("ssim: window larger than the volume");
  }
  if (!(data_range > 0.0)) throw ValidationError("ssim: data_range must be positive");
  const std::size_t n = a.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a[i];
    y[i] = b[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const int w = opt.window;
  const double count = static_cast<double>(w) * w * w;
  const auto sx = box_sum(x, dims, w);
  const auto sy = box_sum(y, dims, w);
  const auto sxx = box_sum(xx, dims, w);
  const auto syy = box_sum(yy, dims, w);
  const auto sxy = box_sum(xy, dims, w);
  const double c1 = (opt.k1 * data_range) * (opt.k1 * data_range);
  const double c2 = (opt.k2 * data_range) * (opt.k2 * data_range);
  std::vector<double> out(sx.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mx = sx[i] / count;
    const double my = sy[i] / count;
    // Sample (unbiased) window statistics.
    const double vx = std::max(0.0, (sxx[i] - count * mx * mx) / (count - 1.0));
    const double vy = std::max(0.0, (syy[i] - count * my * my) / (count - 1.0));
    const double cxy = (sxy[i] - count * mx * my) / (count - 1.0);
    out[i] = ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return out;
}

double ssim(const Volume& a, const Volume& b, double data_range, const SsimOptions& opt) {
  if (a == b) {
    ssim_map(a, b, data_range, opt);  // argument checks only
    return 1.0;
  }
  const auto m = ssim_map(a, b, data_range, opt);
  return pairwise_sum(m) / static_cast<double>(m.size());
}

double intensity_range(const Volume& v) {
  const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
  const double r = static_cast<double>(*hi) - *lo;
  return r > 0.0 ? r : 1.0;
}

double mr_ssim(const Volume& generated, const std::vector<Volume>& references, int n_refs, std::uint64_t seed,
               std::optional<double> data_range, const SsimOptions& opt) {
  if (n_refs < 1) throw ValidationError("mr_ssim: n_refs must be >= 1");
  if (references.size() < static_cast<std::size_t>(n_refs)) {
    throw ValidationError("mr_ssim: need at least " + std::to_string(n_refs) + " references, got " +
                          std::to_string(references.size()));
  }
  std::vector<std::pair<std::uint64_t, std::size_t>> order(references.size());
  for (std::size_t i = 0; i < references.size(); ++i) order[i] = {content_hash(references[i]), i};
  std::sort(order.begin(), order.end());
  // Partial Fisher-Yates over the canonical order.
  RngStream rng(CounterRng::derive(seed, "mr-ssim"));
  std::vector<double> scores;
  for (int r = 0; r < n_refs; ++r) {
    const std::size_t pick = r + rng.below(order.size() - r);
    std::swap(order[r], order[pick]);
    const Volume& ref = references[order[r].second];
    scores.push_back(ssim(generated, ref, data_range.value_or(intensity_range(ref)), opt));
  }
  return pairwise_sum(scores) / static_cast<double>(scores.size());
}

MetricReport evaluate(const Volume& generated, const Volume& reference, std::optional<double> data_range,
                      const SsimOptions& opt) {
  MetricReport r;
  r.data_range_from_reference = !data_range.has_value();
  r.data_range = data_range.value_or(intensity_range(reference));
  r.psnr = psnr(generated, reference, r.data_range);
  r.ssim = ssim(generated, reference, r.data_range, opt);
  return r;
}

}  // namespace c2v::metrics
