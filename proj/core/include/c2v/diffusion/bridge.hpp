#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "c2v/common/error.hpp"
#include "c2v/common/rng.hpp"
#include "c2v/diffusion/schedule.hpp"
#include "c2v/geometry/volume.hpp"

namespace c2v::diffusion {

// Element-wise bridge algebra on flat fields. Coefficients are double; every
// output element is evaluated in double and rounded once to T.

namespace detail {
inline void require_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeMismatch(std::string(what) + ": field sizes differ");
}
}  // namespace detail

/// x_t = (1 - alpha_t) x0 + alpha_t xT + sqrt(delta_t) eps
template <class T>
void forward_sample(std::span<const T> x0, std::span<const T> xT, int t, std::span<const T> eps,
                    const BridgeSchedule& s, std::span<T> out) {
  detail::require_sizes(x0.size(), xT.size(), "forward_sample");
  detail::require_sizes(x0.size(), eps.size(), "forward_sample");
  detail::require_sizes(x0.size(), out.size(), "forward_sample");
  const double a = s.alpha(t);
  const double sd = std::sqrt(s.delta(t));
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = static_cast<T>((1.0 - a) * x0[n] + a * xT[n] + sd * eps[n]);
  }
}

/// Regression target alpha_t (xT - x0) + sqrt(delta_t) eps.
template <class T>
void loss_target(std::span<const T> x0, std::span<const T> xT, int t, std::span<const T> eps,
                 const BridgeSchedule& s, std::span<T> out) {
  detail::require_sizes(x0.size(), xT.size(), "loss_target");
  detail::require_sizes(x0.size(), eps.size(), "loss_target");
  detail::require_sizes(x0.size(), out.size(), "loss_target");
  const double a = s.alpha(t);
  const double sd = std::sqrt(s.delta(t));
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = static_cast<T>(a * (static_cast<double>(xT[n]) - x0[n]) + sd * eps[n]);
  }
}

/// Forward transition x_t | x_{t-1}: a x_{t-1} + b xT + sqrt(delta_{t|t-1}) eps.
template <class T>
void forward_transition(std::span<const T> x_prev, std::span<const T> xT, int t, std::span<const T> eps,
                        const BridgeSchedule& s, std::span<T> out) {
  detail::require_sizes(x_prev.size(), xT.size(), "forward_transition");
  detail::require_sizes(x_prev.size(), eps.size(), "forward_transition");
  detail::require_sizes(x_prev.size(), out.size(), "forward_transition");
  const double a = s.transition_a(t);
  const double b = s.transition_b(t);
  const double sd = std::sqrt(s.delta_cond(t));
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = static_cast<T>(a * x_prev[n] + b * xT[n] + sd * eps[n]);
  }
}

/// x_to = c_xt x + c_st y - c_ft f + sqrt(delta_tilde) eps. An empty eps
/// means zero noise.
template <class T>
void reverse_jump(std::span<const T> x, std::span<const T> f_pred, std::span<const T> y,
                  const StepCoefficients& c, std::span<const T> eps, double noise_scale, std::span<T> out) {
  detail::require_sizes(x.size(), f_pred.size(), "reverse_step");
  detail::require_sizes(x.size(), y.size(), "reverse_step");
  detail::require_sizes(x.size(), out.size(), "reverse_step");
  if (!eps.empty()) detail::require_sizes(x.size(), eps.size(), "reverse_step");
  const double sd = noise_scale * std::sqrt(c.delta_tilde);
  for (std::size_t n = 0; n < out.size(); ++n) {
    double v = c.c_xt * x[n] + c.c_st * y[n] - c.c_ft * f_pred[n];
    if (!eps.empty()) v += sd * eps[n];
    out[n] = static_cast<T>(v);
  }
}

/// One Markovian reverse step t -> t-1. At t = 1 the step is deterministic
/// and a nonzero eps is rejected.
template <class T>
void reverse_step(std::span<const T> x_t, std::span<const T> f_pred, std::span<const T> y, int t,
                  std::span<const T> eps, const BridgeSchedule& s, std::span<T> out) {
  if (t < 1 || t > s.steps()) throw ValidationError("reverse_step: t out of range");
  if (t == 1) {
    for (T e : eps) {
      if (e != T(0)) throw ValidationError("reverse_step: eps must be zero at t = 1");
    }
  }
  reverse_jump(x_t, f_pred, y, s.jump(t, t - 1), eps, 1.0, out);
}

/// Mean absolute difference.
template <class T>
double l1_loss(std::span<const T> pred, std::span<const T> target) {
  detail::require_sizes(pred.size(), target.size(), "l1_loss");
  if (pred.empty()) throw ValidationError("l1_loss: empty input");
  double s = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) s += std::abs(static_cast<double>(pred[n]) - target[n]);
  return s / static_cast<double>(pred.size());
}

/// Standard normal noise for (seed, sample id, timestep); element n depends
/// only on those and n.
template <class T>
void fill_noise(std::span<T> out, std::uint64_t seed, std::uint64_t sample_id, int t) {
  const auto rng = CounterRng::derive(seed, "bridge-noise", sample_id, static_cast<std::uint64_t>(t));
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = static_cast<T>(rng.normal(n));
}

// Volume wrappers (geometry-checked).
Volume forward_sample(const Volume& x0, const Volume& xT, int t, const Volume& eps, const BridgeSchedule& s);
Volume loss_target(const Volume& x0, const Volume& xT, int t, const Volume& eps, const BridgeSchedule& s);
Volume reverse_step(const Volume& x_t, const Volume& f_pred, const Volume& y, int t, const Volume* eps,
                    const BridgeSchedule& s);
double l1_loss(const Volume& pred, const Volume& target);
Volume noise_volume(const Grid& grid, std::uint64_t seed, std::uint64_t sample_id, int t);

}  // namespace c2v::diffusion
