#include "c2v/diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "c2v/common/error.hpp"

namespace c2v::diffusion {

BridgeSchedule::BridgeSchedule(int total_steps) : total_(total_steps) {
  if (total_steps < 2) throw ValidationError("bridge schedule needs T >= 2");
  alpha_.resize(total_ + 1);
  delta_.resize(total_ + 1);
  for (int t = 0; t <= total_; ++t) {
    alpha_[t] = static_cast<double>(t) / total_;
    // 2 t (T - t) / T^2: the integer numerator keeps delta exactly symmetric.
    delta_[t] = 2.0 * (static_cast<double>(t) * static_cast<double>(total_ - t)) /
                (static_cast<double>(total_) * static_cast<double>(total_));
  }
  // Pin the endpoints exactly.
  delta_[0] = 0.0;
  delta_[total_] = 0.0;
  per_step_.resize(total_ + 1);
  for (int t = 1; t <= total_; ++t) per_step_[t] = jump(t, t - 1);
}

StepCoefficients BridgeSchedule::jump(int from, int to) const {
  if (from < 1 || from > total_ || to < 0 || to >= from) {
    throw ValidationError("invalid bridge jump " + std::to_string(from) + " -> " + std::to_string(to));
  }
  const double a_s = alpha_[from];
  const double a_p = alpha_[to];
  const double d_s = delta_[from];
  const double d_p = delta_[to];
  StepCoefficients c;
  const double ratio = (1.0 - a_s) / (1.0 - a_p);
  c.delta_cond = d_s - d_p * ratio * ratio;
  if (d_s == 0.0) {
    // from = T: x_T = y carries no information about the noise, so the
    // posterior of x_to is its marginal; write it with x0 = x_T - f.
    c.delta_cond = 0.0;
    c.c_xt = 1.0 - a_p;
    c.c_st = a_p;
    c.c_ft = 1.0 - a_p;
    c.delta_tilde = d_p;
    return c;
  }
  c.c_xt = (d_p / d_s) * ratio + (c.delta_cond / d_s) * (1.0 - a_p);
  c.c_st = a_p - a_s * ratio * (d_p / d_s);
  c.c_ft = (1.0 - a_p) * c.delta_cond / d_s;
  c.delta_tilde = c.delta_cond * d_p / d_s;
  return c;
}

StepCoefficients BridgeSchedule::implicit_jump(int from, int to, double eta) const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("implicit jump: eta must lie in [0, 1]");
  StepCoefficients c = jump(from, to);
  if (delta_[from] == 0.0) return c;
  const double a_s = alpha_[from];
  const double a_p = alpha_[to];
  const double sigma2 = eta * eta * c.delta_tilde;
  const double k = std::sqrt(std::max(0.0, delta_[to] - sigma2) / delta_[from]);
  c.c_xt = (1.0 - a_p) + k * a_s;
  c.c_st = a_p - k * a_s;
  c.c_ft = (1.0 - a_p) - k * (1.0 - a_s);
  c.delta_tilde = sigma2;
  return c;
}

double BridgeSchedule::transition_a(int t) const {
  if (t < 1 || t > total_) throw ValidationError("transition timestep out of range");
  return (1.0 - alpha_[t]) / (1.0 - alpha_[t - 1]);
}

double BridgeSchedule::transition_b(int t) const { return alpha_[t] - transition_a(t) * alpha_[t - 1]; }

std::vector<int> ddim_timesteps(int total_steps, int n_steps) {
  if (total_steps < 1 || n_steps < 1 || n_steps > total_steps) {
    throw ValidationError("ddim_timesteps: need 1 <= n_steps <= T");
  }
  std::vector<int> ts(n_steps);
  for (int i = 0; i < n_steps; ++i) {
    // round(T * (n - i) / n)
    const long long num = 2LL * total_steps * (n_steps - i) + n_steps;
    ts[i] = static_cast<int>(num / (2LL * n_steps));
  }
  return ts;
}

}  // namespace c2v::diffusion
