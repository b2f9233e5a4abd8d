#pragma once

#include <vector>

namespace c2v::diffusion {

/// Coefficients of one reverse jump from timestep `from` to `to` (< from):
///   x_to = c_xt * x_from + c_st * y - c_ft * f + sqrt(delta_tilde) * eps
/// with y the bridge endpoint and f the predicted noise part
/// alpha_from * (y - x0) + sqrt(delta_from) * eps.
struct StepCoefficients {
  double delta_cond = 0.0;  // variance of x_from given x_to
  double c_xt = 0.0;
  double c_st = 0.0;
  double c_ft = 0.0;
  double delta_tilde = 0.0;  // posterior variance of x_to given x_from, x0
};

/// Brownian bridge schedule with alpha_t = t / T and
/// delta_t = 2 (alpha_t - alpha_t^2). Arrays are indexed by t in [0, T];
/// entries at t = 0 of the per-step arrays are zero. Immutable.
class BridgeSchedule {
 public:
  explicit BridgeSchedule(int total_steps);

  int steps() const noexcept { return total_; }
  double alpha(int t) const { return alpha_.at(t); }
  double delta(int t) const { return delta_.at(t); }
  double delta_cond(int t) const { return per_step_.at(t).delta_cond; }
  double c_xt(int t) const { return per_step_.at(t).c_xt; }
  double c_st(int t) const { return per_step_.at(t).c_st; }
  double c_ft(int t) const { return per_step_.at(t).c_ft; }
  double delta_tilde(int t) const { return per_step_.at(t).delta_tilde; }

  /// Generalized coefficients for a jump from -> to, 0 <= to < from <= T.
  /// For to = from - 1 this is the per-step entry.
  StepCoefficients jump(int from, int to) const;

  /// Implicit jump that keeps the marginal of x_to: the noise estimate
  /// x_from - (1 - alpha) x0 - alpha y is carried over with scale
  /// sqrt((delta_to - sigma^2) / delta_from), sigma^2 = eta^2 * delta_tilde
  /// being fresh noise (returned as delta_tilde). eta = 1 gives jump().
  /// From T, where x_T = y holds no noise, the full delta_to is fresh.
  StepCoefficients implicit_jump(int from, int to, double eta) const;

  /// Forward transition x_t | x_{t-1}: mean = a * x_{t-1} + b * y.
  double transition_a(int t) const;
  double transition_b(int t) const;

 private:
  int total_;
  std::vector<double> alpha_;
  std::vector<double> delta_;
  std::vector<StepCoefficients> per_step_;
};

inline BridgeSchedule make_schedule(int total_steps) { return BridgeSchedule(total_steps); }

/// Evenly spaced, strictly decreasing timesteps starting at T; the step after
/// the last entry is 0. n_steps = T gives T, T-1, ..., 1.
std::vector<int> ddim_timesteps(int total_steps, int n_steps);

}  // namespace c2v::diffusion
