#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "c2v/geometry/conditions.hpp"
#include "c2v/nn/tensor.hpp"

namespace c2v::nn {

struct DenoiserConfig {
  int in_channels = 5;
  std::vector<int> stage_channels{16, 32, 48, 64};
  int attention_at_factor = 8;
  int attention_heads = 2;
  int attention_head_channels = 16;
  int groups = 8;
  int resolution = 32;
  int time_embedding_dim = 64;

  /// Auxiliary condition channels concatenated after x_t, canonical order.
  geometry::AuxChannels aux = geometry::AuxChannels::all();
  /// SDF channels are divided by this and clipped to [-1, 1].
  double sdf_scale = 8.0;
  /// Images enter the bridge as (image - image_offset) * image_scale.
  double image_offset = 0.5;
  double image_scale = 2.0;

  /// Throws ValidationError on inconsistent fields.
  void validate() const;
  /// in_channels derived from `aux`.
  static DenoiserConfig for_aux(const geometry::AuxChannels& aux);
};

void to_json(nlohmann::json& j, const DenoiserConfig& c);
void from_json(const nlohmann::json& j, DenoiserConfig& c);

/// Largest divisor of `channels` not above `max_groups`.
int group_count(int channels, int max_groups);

/// [n, dim] sinusoidal embedding of integer timesteps; frequencies are
/// geometric from 1 down to 1e-4.
template <class T>
Tensor<T> timestep_embedding(std::span<const int> t, int dim);

template <class T>
using NamedTensor = std::pair<std::string, Tensor<T>>;

/// Residual U-Net predicting the noise part of x_t. One residual block per
/// stage, adaptive group norm driven by the timestep embedding, self-attention
/// at the configured downsampling factor and in the middle block.
template <class T>
class UNet {
 public:
  UNet(const DenoiserConfig& cfg, std::uint64_t seed);

  /// x [N, in_channels, R, R, R], one timestep per batch entry -> [N, 1, R, R, R].
  Tensor<T> forward(const Tensor<T>& x, std::span<const int> t) const;

  /// Copy with its own parameter storage (plain copies share it).
  UNet clone() const;

  const DenoiserConfig& config() const { return cfg_; }
  std::vector<NamedTensor<T>>& parameters() { return params_; }
  const std::vector<NamedTensor<T>>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  Tensor<T>& parameter(const std::string& name);

 private:
  struct ResBlock {
    std::size_t first = 0;  // index of gn1.g in params_
    int in = 0, out = 0;
  };
  struct AttnBlock {
    std::size_t first = 0;
    int channels = 0;
  };

  Tensor<T>& add_param(const std::string& name, Shape shape, double bound);
  ResBlock make_res(const std::string& prefix, int in, int out);
  AttnBlock make_attn(const std::string& prefix, int channels);
  Tensor<T> run_res(const ResBlock& b, const Tensor<T>& x, const Tensor<T>& emb) const;
  Tensor<T> run_attn(const AttnBlock& b, const Tensor<T>& x) const;
  const Tensor<T>& p(std::size_t i) const { return params_[i].second; }

  DenoiserConfig cfg_;
  std::uint64_t seed_;
  std::vector<NamedTensor<T>> params_;
  std::size_t time_first_ = 0;
  std::size_t in_conv_ = 0;
  std::vector<ResBlock> down_;
  std::vector<AttnBlock> down_attn_;  // channels == 0 when absent
  ResBlock mid1_, mid2_;
  AttnBlock mid_attn_;
  std::vector<ResBlock> up_;  // indexed by stage
  std::vector<AttnBlock> up_attn_;
  std::size_t out_first_ = 0;
  int attention_stage_ = -1;
};

extern template class UNet<float>;
extern template class UNet<double>;

}  // namespace c2v::nn
