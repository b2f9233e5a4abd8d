#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "c2v/common/rng.hpp"
#include "c2v/nn/ops.hpp"

namespace c2v::test {

inline nn::Tensor<double> random_tensor(nn::Shape shape, std::uint64_t seed, double scale = 1.0,
                                        bool requires_grad = true) {
  std::vector<double> v(static_cast<std::size_t>(nn::numel(shape)));
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = scale * rng.normal(i);
  return nn::Tensor<double>::from(std::move(shape), std::move(v), requires_grad);
}

/// Scalar probe of an op output: sum(out * w) for a fixed random w.
inline nn::Tensor<double> project(const nn::Tensor<double>& out, std::uint64_t seed) {
  return nn::sum(nn::mul(out, random_tensor(out.shape(), seed, 1.0, false)));
}

struct GradCheck {
  double max_rel_error = 0.0;  // over inputs, ||g_fd - g|| / max(||g_fd||, ||g||)
  std::size_t entries = 0;
};

/// Central finite differences against the reverse pass. At most `max_entries`
/// entries of each input are probed (evenly strided).
inline GradCheck gradcheck(std::vector<nn::Tensor<double>> inputs, const std::function<nn::Tensor<double>()>& loss,
                           double h = 1e-5, std::size_t max_entries = 64) {
  for (auto& x : inputs) x.zero_grad();
  nn::Tensor<double> l = loss();
  l.backward();
  GradCheck out;
  for (auto& x : inputs) {
    const std::vector<double> analytic = x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end())
                                                      : std::vector<double>(static_cast<std::size_t>(x.size()), 0.0);
    const std::size_t n = static_cast<std::size_t>(x.size());
    const std::size_t stride = std::max<std::size_t>(1, n / max_entries);
    double diff2 = 0.0, fd2 = 0.0, an2 = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
      nn::NoGradGuard guard;
      const double keep = x.data()[i];
      x.data()[i] = keep + h;
      const double up = loss().data()[0];
      x.data()[i] = keep - h;
      const double down = loss().data()[0];
      x.data()[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      diff2 += (fd - analytic[i]) * (fd - analytic[i]);
      fd2 += fd * fd;
      an2 += analytic[i] * analytic[i];
      ++out.entries;
    }
    const double denom = std::sqrt(std::max(fd2, an2));
    if (denom > 0.0) out.max_rel_error = std::max(out.max_rel_error, std::sqrt(diff2) / denom);
  }
  return out;
}

}  // namespace c2v::test
