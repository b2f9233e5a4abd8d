#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "c2v/diffusion/bridge.hpp"
#include "c2v/diffusion/schedule.hpp"
#include "c2v/geometry/conditions.hpp"

namespace c2v::diffusion {

struct SampleOptions {
  int n_steps = 10;
  std::uint64_t seed = 0;
  std::uint64_t sample_id = 0;
  /// Share of the posterior noise drawn fresh, 0 = deterministic after the
  /// first jump. With eta = 1 and n_steps = T the loop is the ancestral sampler.
  double eta = 0.0;
};

/// f(x_t, t) -> predicted noise part, written to the output span.
template <class T>
using NoisePredictor = std::function<void(std::span<const T> x_t, int t, std::span<T> f_out)>;

/// Reverse bridge from x_T = endpoint over ddim_timesteps(T, n_steps); each
/// jump s -> s' is BridgeSchedule::implicit_jump(s, s', eta).
template <class T>
std::vector<T> sample_bridge(std::span<const T> endpoint, const NoisePredictor<T>& predict,
                             const BridgeSchedule& s, const SampleOptions& opt) {
  const auto ts = ddim_timesteps(s.steps(), opt.n_steps);
  std::vector<T> x(endpoint.begin(), endpoint.end());
  std::vector<T> f(x.size());
  std::vector<T> eps;
  std::vector<T> next(x.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int from = ts[i];
    const int to = i + 1 < ts.size() ? ts[i + 1] : 0;
    predict(std::span<const T>(x), from, std::span<T>(f));
    const StepCoefficients c = s.implicit_jump(from, to, opt.eta);
    const bool noisy = c.delta_tilde > 0.0;
    if (noisy) {
      eps.resize(x.size());
      fill_noise<T>(eps, opt.seed, opt.sample_id, from);
    } else {
      eps.clear();
    }
    reverse_jump<T>(x, f, endpoint, c, eps, 1.0, next);
    x.swap(next);
  }
  return x;
}

/// Volume-level noise predictor with its own view of the conditions.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  /// Bridge endpoint x_T for this condition (in the model's units).
  virtual Volume endpoint(const geometry::ConditionSet& cond) const = 0;
  virtual Volume predict(const Volume& x_t, const geometry::ConditionSet& cond, int t) const = 0;
};

/// Synthesizes an image for one condition set.
Volume sample(const Denoiser& denoiser, const geometry::ConditionSet& cond, const BridgeSchedule& s,
              const SampleOptions& opt);

}  // namespace c2v::diffusion
