#include "c2v/nn/denoiser.hpp"

#include <algorithm>

#include "c2v/common/error.hpp"
#include "c2v/nn/ops.hpp"

namespace c2v::nn {
namespace {

void require_model_grid(const DenoiserConfig& cfg, const Grid& g, const char* what) {
  const int r = cfg.resolution;
  if (g.dims != std::array<int, 3>{r, r, r}) {
    throw ShapeMismatch(std::string(what) + ": grid " + std::to_string(g.dims[0]) + "x" + std::to_string(g.dims[1]) +
                        "x" + std::to_string(g.dims[2]) + " does not match model resolution " + std::to_string(r));
  }
}

void append_sdf(std::vector<float>& out, const Volume& v, double scale) {
  for (float s : v.data()) out.push_back(static_cast<float>(std::clamp(s / scale, -1.0, 1.0)));
}

}  // namespace

std::vector<float> encode_endpoint(const DenoiserConfig& cfg, const geometry::ConditionSet& cond) {
  require_model_grid(cfg, cond.grid(), "endpoint");
  std::vector<float> y;
  y.reserve(cond.s_c.size());
  append_sdf(y, cond.s_c, cfg.sdf_scale);
  return y;
}

std::vector<float> encode_aux(const DenoiserConfig& cfg, const geometry::ConditionSet& cond) {
  require_model_grid(cfg, cond.grid(), "conditions");
  std::vector<float> out;
  out.reserve(cfg.aux.count() * cond.s_c.size());
  for (auto c : cfg.aux.ordered()) {
    const Volume& v = cond.channel(c);
    if (c == geometry::Channel::kPialSdf || c == geometry::Channel::kWhiteSdf) {
      append_sdf(out, v, cfg.sdf_scale);
    } else {
      out.insert(out.end(), v.data().begin(), v.data().end());
    }
  }
  return out;
}

std::vector<float> encode_image(const DenoiserConfig& cfg, const Volume& image) {
  require_model_grid(cfg, image.grid(), "image");
  std::vector<float> out(image.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>((image[i] - cfg.image_offset) * cfg.image_scale);
  }
  return out;
}

Volume decode_image(const DenoiserConfig& cfg, std::span<const float> x, const Grid& grid) {
  if (x.size() != grid.voxel_count()) throw ShapeMismatch("decode_image: size mismatch");
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(x[i] / cfg.image_scale + cfg.image_offset);
  return Volume(grid, std::move(out));
}

void assemble_input(std::span<const float> x_t, std::span<const float> aux, std::span<float> dst) {
  if (dst.size() != x_t.size() + aux.size()) throw ShapeMismatch("assemble_input: size mismatch");
  std::copy(x_t.begin(), x_t.end(), dst.begin());
  std::copy(aux.begin(), aux.end(), dst.begin() + static_cast<std::ptrdiff_t>(x_t.size()));
}

ModelDenoiser::ModelDenoiser(UNet<float> net, int steps) : net_(std::move(net)), steps_(steps) {
  if (steps < 2) throw ValidationError("denoiser: T must be at least 2");
  for (auto& [name, t] : net_.parameters()) {
    t.set_requires_grad(false);
    t.zero_grad();
  }
}

Volume ModelDenoiser::endpoint(const geometry::ConditionSet& cond) const {
  return Volume(cond.grid(), encode_endpoint(net_.config(), cond));
}

Volume ModelDenoiser::predict(const Volume& x_t, const geometry::ConditionSet& cond, int t) const {
  if (t < 1 || t > steps_) {
    throw ValidationError("denoiser: t = " + std::to_string(t) + " outside [1, " + std::to_string(steps_) + "]");
  }
  const auto& cfg = net_.config();
  require_model_grid(cfg, x_t.grid(), "x_t");
  require_same_grid(x_t.grid(), cond.grid(), "predict");
  const std::vector<float> aux = encode_aux(cfg, cond);
  const std::int64_t r = cfg.resolution;
  std::vector<float> in(x_t.size() + aux.size());
  assemble_input(x_t.data(), aux, in);
  const auto x = Tensor<float>::from({1, cfg.in_channels, r, r, r}, std::move(in));
  const int ts[1] = {t};
  const NoGradGuard no_grad;
  const auto out = net_.forward(x, ts);
  return Volume(x_t.grid(), std::vector<float>(out.data().begin(), out.data().end()));
}

Volume synthesize(const ModelDenoiser& model, const geometry::ConditionSet& cond, const diffusion::BridgeSchedule& s,
                  const diffusion::SampleOptions& opt) {
  const Volume x = diffusion::sample(model, cond, s, opt);
  return decode_image(model.config(), x.data(), x.grid());
}

}  // namespace c2v::nn
