#pragma once

#include <span>
#include <vector>

#include "c2v/diffusion/sampler.hpp"
#include "c2v/geometry/conditions.hpp"
#include "c2v/geometry/volume.hpp"
#include "c2v/nn/unet.hpp"

namespace c2v::nn {

/// Bridge endpoint: clip(s_c / sdf_scale, -1, 1).
std::vector<float> encode_endpoint(const DenoiserConfig& cfg, const geometry::ConditionSet& cond);
/// Active auxiliary channels in canonical order, SDFs normalized like the
/// endpoint, binary maps unchanged.
std::vector<float> encode_aux(const DenoiserConfig& cfg, const geometry::ConditionSet& cond);
std::vector<float> encode_image(const DenoiserConfig& cfg, const Volume& image);
Volume decode_image(const DenoiserConfig& cfg, std::span<const float> x, const Grid& grid);

/// Writes [x_t, aux...] for one batch entry into `dst` (in_channels * R^3).
void assemble_input(std::span<const float> x_t, std::span<const float> aux, std::span<float> dst);

/// Frozen network exposed to the sampler. Works in model units: endpoint()
/// and predict() return encoded volumes; use decode_image on the result of
/// diffusion::sample.
class ModelDenoiser final : public diffusion::Denoiser {
 public:
  /// `steps` is the T the network was trained with; predict() rejects t
  /// outside [1, steps].
  ModelDenoiser(UNet<float> net, int steps);

  Volume endpoint(const geometry::ConditionSet& cond) const override;
  Volume predict(const Volume& x_t, const geometry::ConditionSet& cond, int t) const override;

  const DenoiserConfig& config() const { return net_.config(); }
  int steps() const { return steps_; }

 private:
  UNet<float> net_;
  int steps_;
};

/// Samples and decodes to image intensities.
Volume synthesize(const ModelDenoiser& model, const geometry::ConditionSet& cond, const diffusion::BridgeSchedule& s,
                  const diffusion::SampleOptions& opt);

}  // namespace c2v::nn
