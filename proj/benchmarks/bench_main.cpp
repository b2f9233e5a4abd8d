#include <benchmark/benchmark.h>

#include "c2v/common/rng.hpp"
#include "c2v/geometry/distance.hpp"
#include "c2v/metrics/image_metrics.hpp"
#include "c2v/nn/ops.hpp"
#include "c2v/nn/unet.hpp"

using namespace c2v;

namespace {

nn::Tensor<float> random_tensor(nn::Shape s, std::uint64_t seed) {
  std::vector<float> v(static_cast<std::size_t>(nn::numel(s)));
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(rng.normal(i));
  return nn::Tensor<float>::from(std::move(s), std::move(v));
}

void BM_Conv3dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int r = static_cast<int>(state.range(1));
  const auto x = random_tensor({1, c, r, r, r}, 1);
  const auto w = random_tensor({c, c, 3, 3, 3}, 2);
  const auto b = random_tensor({c}, 3);
  const nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv3d(x, w, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c) * c * 27 * r * r * r);
}
BENCHMARK(BM_Conv3dForward)->Args({16, 32})->Args({32, 16})->Args({64, 8})->Unit(benchmark::kMillisecond);

void BM_Conv3dBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int r = static_cast<int>(state.range(1));
  auto x = random_tensor({1, c, r, r, r}, 1);
  auto w = random_tensor({c, c, 3, 3, 3}, 2);
  x.set_requires_grad(true);
  w.set_requires_grad(true);
  for (auto _ : state) {
    auto y = nn::sum(nn::conv3d(x, w, nn::Tensor<float>()));
    y.backward();
  }
}
BENCHMARK(BM_Conv3dBackward)->Args({16, 32})->Args({32, 16})->Unit(benchmark::kMillisecond);

void BM_BvhClosestPoint(benchmark::State& state) {
  const geometry::PointMeshDistance query(geometry::make_icosphere(static_cast<int>(state.range(0)), 10.0));
  const CounterRng rng(4);
  std::uint64_t i = 0;
  for (auto _ : state) {
    const Vec3 p(20 * rng.uniform(3 * i) - 10, 20 * rng.uniform(3 * i + 1) - 10, 20 * rng.uniform(3 * i + 2) - 10);
    benchmark::DoNotOptimize(query.distance(p));
    ++i;
  }
}
BENCHMARK(BM_BvhClosestPoint)->DenseRange(3, 6);

void BM_SdfGrid(benchmark::State& state) {
  const geometry::SignedDistance sdf(geometry::make_icosphere(5, 10.0));
  const Grid grid = Grid::centered(static_cast<int>(state.range(0)), 24.0 / state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(geometry::sample_sdf_grid(sdf, grid));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.voxel_count()));
}
BENCHMARK(BM_SdfGrid)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const Grid g = Grid::centered(static_cast<int>(state.range(0)), 1.0);
  Volume a(g), b(g);
  const CounterRng rng(5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<float>(rng.uniform(2 * i));
    b[i] = static_cast<float>(rng.uniform(2 * i + 1));
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a, b, 1.0));
}
BENCHMARK(BM_Ssim)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_UNetForward(benchmark::State& state) {
  const nn::DenoiserConfig cfg;
  const nn::UNet<float> net(cfg, 1);
  const auto x = random_tensor({1, cfg.in_channels, cfg.resolution, cfg.resolution, cfg.resolution}, 6);
  const int t[] = {500};
  const nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, t));
}
BENCHMARK(BM_UNetForward)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
