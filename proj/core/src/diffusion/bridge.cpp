#include "c2v/diffusion/bridge.hpp"

#include "c2v/diffusion/sampler.hpp"

namespace c2v::diffusion {

Volume forward_sample(const Volume& x0, const Volume& xT, int t, const Volume& eps, const BridgeSchedule& s) {
  require_same_grid(x0.grid(), xT.grid(), "forward_sample");
  require_same_grid(x0.grid(), eps.grid(), "forward_sample");
  if (t < 0 || t > s.steps()) throw ValidationError("forward_sample: t out of range");
  Volume out(x0.grid());
  forward_sample<float>(x0.data(), xT.data(), t, eps.data(), s, out.data());
  return out;
}

Volume loss_target(const Volume& x0, const Volume& xT, int t, const Volume& eps, const BridgeSchedule& s) {
  require_same_grid(x0.grid(), xT.grid(), "loss_target");
  require_same_grid(x0.grid(), eps.grid(), "loss_target");
  if (t < 0 || t > s.steps()) throw ValidationError("loss_target: t out of range");
  Volume out(x0.grid());
  loss_target<float>(x0.data(), xT.data(), t, eps.data(), s, out.data());
  return out;
}

Volume reverse_step(const Volume& x_t, const Volume& f_pred, const Volume& y, int t, const Volume* eps,
                    const BridgeSchedule& s) {
  require_same_grid(x_t.grid(), f_pred.grid(), "reverse_step");
  require_same_grid(x_t.grid(), y.grid(), "reverse_step");
  if (eps) require_same_grid(x_t.grid(), eps->grid(), "reverse_step");
  Volume out(x_t.grid());
  reverse_step<float>(x_t.data(), f_pred.data(), y.data(), t,
                      eps ? eps->data() : std::span<const float>{}, s, out.data());
  return out;
}

double l1_loss(const Volume& pred, const Volume& target) {
  require_same_grid(pred.grid(), target.grid(), "l1_loss");
  return l1_loss<float>(pred.data(), target.data());
}

Volume noise_volume(const Grid& grid, std::uint64_t seed, std::uint64_t sample_id, int t) {
  Volume out(grid);
  fill_noise<float>(out.data(), seed, sample_id, t);
  return out;
}

Volume sample(const Denoiser& denoiser, const geometry::ConditionSet& cond, const BridgeSchedule& s,
              const SampleOptions& opt) {
  const Volume y = denoiser.endpoint(cond);
  const Grid grid = y.grid();
  NoisePredictor<float> predict = [&](std::span<const float> x, int t, std::span<float> f) {
    const Volume xv(grid, std::vector<float>(x.begin(), x.end()));
    const Volume pred = denoiser.predict(xv, cond, t);
    require_same_grid(pred.grid(), grid, "denoiser output");
    std::copy(pred.data().begin(), pred.data().end(), f.begin());
  };
  return Volume(grid, sample_bridge<float>(y.data(), predict, s, opt));
}

}  // namespace c2v::diffusion
