#include <doctest.h>

#include "c2v/common/error.hpp"
#include "c2v/metrics/image_metrics.hpp"
#include "support/helpers.hpp"

using namespace c2v;
using namespace c2v::metrics;

namespace {

// Per-window SSIM straight from the definition, no running sums.
double naive_ssim(const Volume& a, const Volume& b, double range, int w) {
  const auto& d = a.grid().dims;
  const double c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
  double total = 0.0;
  int count = 0;
  const double n = static_cast<double>(w) * w * w;
  for (int i = 0; i + w <= d[0]; ++i)
    for (int j = 0; j + w <= d[1]; ++j)
      for (int k = 0; k + w <= d[2]; ++k) {
        double ma = 0, mb = 0;
        for (int x = 0; x < w; ++x)
          for (int y = 0; y < w; ++y)
            for (int z = 0; z < w; ++z) {
              ma += a.at(i + x, j + y, k + z);
              mb += b.at(i + x, j + y, k + z);
            }
        ma /= n;
        mb /= n;
        double va = 0, vb = 0, cov = 0;
        for (int x = 0; x < w; ++x)
          for (int y = 0; y < w; ++y)
            for (int z = 0; z < w; ++z) {
              const double da = a.at(i + x, j + y, k + z) - ma, db = b.at(i + x, j + y, k + z) - mb;
              va += da * da;
              vb += db * db;
              cov += da * db;
            }
        va /= n - 1;
        vb /= n - 1;
        cov /= n - 1;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / count;
}

Grid grid(int n) { return Grid::centered(n, 1.0); }

}  // namespace

TEST_CASE("psnr") {
  const Volume a = test::random_volume(grid(10), 1, 0.0, 1.0);
  CHECK(psnr(a, a, 1.0) == kPsnrInfinity);
  Volume b = a;
  for (auto& v : b.storage()) v += 0.1f;
  CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-5));
  const Volume c = test::random_volume(grid(10), 2, 0.0, 1.0);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (double(a[i]) - c[i]) * (double(a[i]) - c[i]);
  mse /= a.size();
  CHECK(std::abs(psnr(a, c, 1.0) - 10.0 * std::log10(1.0 / mse)) < 1e-9);
  Volume d = a;
  for (auto& v : d.storage()) v -= 0.1f;
  CHECK(psnr(a, d, 1.0) == doctest::Approx(psnr(a, b, 1.0)).epsilon(1e-5));
  CHECK_THROWS_AS(psnr(a, Volume(grid(9)), 1.0), ShapeMismatch);
  CHECK_THROWS_AS(psnr(a, b, 0.0), ValidationError);
}

TEST_CASE("ssim basic properties") {
  const Volume a = test::random_volume(grid(12), 3, 0.0, 1.0);
  const Volume b = test::random_volume(grid(12), 4, 0.0, 1.0);
  CHECK(ssim(a, a, 1.0) == 1.0);
  CHECK(std::abs(ssim(a, b, 1.0) - ssim(b, a, 1.0)) < 1e-12);
  CHECK(std::abs(ssim(a, b, 1.0) - naive_ssim(a, b, 1.0, 7)) < 1e-9);
  SsimOptions o;
  o.window = 3;
  CHECK(std::abs(ssim(a, b, 1.0, o) - naive_ssim(a, b, 1.0, 3)) < 1e-9);
  CHECK(ssim_map(a, b, 1.0).size() == 6u * 6u * 6u);
  o.window = 13;
  CHECK_THROWS_AS(ssim(a, b, 1.0, o), ValidationError);
  o.window = 4;
  CHECK_THROWS_AS(ssim(a, b, 1.0, o), ValidationError);
  o.window = 1;
  CHECK_THROWS_AS(ssim(a, b, 1.0, o), ValidationError);
}

TEST_CASE("ssim of an inverted high-contrast volume is low") {
  Volume a(grid(14));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto [x, y, z] = a.grid().unflatten(i);
    a[i] = ((x / 2 + y / 2 + z / 2) % 2) ? 1.0f : 0.0f;
  }
  Volume b = a;
  for (auto& v : b.storage()) v = 1.0f - v;
  CHECK(ssim(a, b, 1.0) < 0.2);
}

TEST_CASE("ssim is invariant under a joint affine rescale") {
  const Volume a = test::random_volume(grid(10), 5, 0.0, 1.0);
  const Volume b = test::random_volume(grid(10), 6, 0.0, 1.0);
  Volume a2 = a, b2 = b;
  for (auto& v : a2.storage()) v = 3.0f * v + 2.0f;
  for (auto& v : b2.storage()) v = 3.0f * v + 2.0f;
  // Luminance terms see the offset; compare with the offset-free form.
  Volume a3 = a, b3 = b;
  for (auto& v : a3.storage()) v *= 3.0f;
  for (auto& v : b3.storage()) v *= 3.0f;
  CHECK(std::abs(ssim(a3, b3, 3.0) - ssim(a, b, 1.0)) < 1e-6);
}

TEST_CASE("mr-ssim") {
  const Volume g = test::random_volume(grid(9), 7, 0.0, 1.0);
  const std::vector<Volume> same(10, g);
  CHECK(mr_ssim(g, same, 10, 1) == doctest::Approx(1.0).epsilon(1e-12));
  const Volume r = test::random_volume(grid(9), 8, 0.0, 1.0);
  CHECK(mr_ssim(g, {r}, 1, 5) == ssim(g, r, intensity_range(r)));
  std::vector<Volume> pool;
  for (int i = 0; i < 8; ++i) pool.push_back(test::random_volume(grid(9), 20 + i, 0.0, 1.0));
  std::vector<Volume> shuffled(pool.rbegin(), pool.rend());
  std::swap(shuffled[0], shuffled[3]);
  CHECK(mr_ssim(g, pool, 3, 42) == mr_ssim(g, shuffled, 3, 42));
  CHECK_THROWS_AS(mr_ssim(g, pool, 9, 1), ValidationError);
}

TEST_CASE("evaluate records the data range source") {
  const Volume a = test::random_volume(grid(8), 9, 0.0, 2.0);
  const Volume b = test::random_volume(grid(8), 10, 0.0, 2.0);
  const auto r = evaluate(a, b);
  CHECK(r.data_range_from_reference);
  CHECK(r.data_range == intensity_range(b));
  const auto e = evaluate(a, b, 5.0);
  CHECK(!e.data_range_from_reference);
  CHECK(e.data_range == 5.0);
}
