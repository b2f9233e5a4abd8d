#include "c2v/nn/unet.hpp"

#include <cmath>

#include "c2v/common/error.hpp"
#include "c2v/common/rng.hpp"
#include "c2v/nn/ops.hpp"

namespace c2v::nn {

void DenoiserConfig::validate() const {
  if (stage_channels.empty()) throw ValidationError("denoiser: stage_channels must not be empty");
  for (int c : stage_channels) {
    if (c < 1) throw ValidationError("denoiser: stage channels must be positive");
  }
  if (in_channels != 1 + static_cast<int>(aux.count())) {
    throw ValidationError("denoiser: in_channels " + std::to_string(in_channels) + " does not match 1 + " +
                          std::to_string(aux.count()) + " active auxiliary channels");
  }
  const int factor = 1 << (stage_channels.size() - 1);
  if (resolution < 1 || resolution % factor != 0) {
    throw ValidationError("denoiser: resolution " + std::to_string(resolution) + " not divisible by " +
                          std::to_string(factor));
  }
  if (attention_at_factor < 1 || (attention_at_factor & (attention_at_factor - 1)) != 0 ||
      attention_at_factor > factor) {
    throw ValidationError("denoiser: attention_at_factor must be a power of two reached by the stages");
  }
  if (attention_heads < 1 || attention_head_channels < 1) throw ValidationError("denoiser: bad attention size");
  if (groups < 1) throw ValidationError("denoiser: groups must be positive");
  if (time_embedding_dim < 2 || time_embedding_dim % 2 != 0) {
    throw ValidationError("denoiser: time_embedding_dim must be even");
  }
  if (!(sdf_scale > 0.0) || !(image_scale > 0.0) || !std::isfinite(image_offset)) {
    throw ValidationError("denoiser: bad input normalization");
  }
}

DenoiserConfig DenoiserConfig::for_aux(const geometry::AuxChannels& aux) {
  DenoiserConfig c;
  c.aux = aux;
  c.in_channels = 1 + static_cast<int>(aux.count());
  return c;
}

void to_json(nlohmann::json& j, const DenoiserConfig& c) {
  j = {{"in_channels", c.in_channels},
       {"stage_channels", c.stage_channels},
       {"attention_at_factor", c.attention_at_factor},
       {"attention_heads", c.attention_heads},
       {"attention_head_channels", c.attention_head_channels},
       {"groups", c.groups},
       {"resolution", c.resolution},
       {"time_embedding_dim", c.time_embedding_dim},
       {"aux", c.aux.to_string()},
       {"sdf_scale", c.sdf_scale},
       {"image_offset", c.image_offset},
       {"image_scale", c.image_scale}};
}

void from_json(const nlohmann::json& j, DenoiserConfig& c) {
  DenoiserConfig d;
  d.aux = geometry::AuxChannels::parse(j.value("aux", d.aux.to_string()));
  d.in_channels = j.value("in_channels", 1 + static_cast<int>(d.aux.count()));
  d.stage_channels = j.value("stage_channels", d.stage_channels);
  d.attention_at_factor = j.value("attention_at_factor", d.attention_at_factor);
  d.attention_heads = j.value("attention_heads", d.attention_heads);
  d.attention_head_channels = j.value("attention_head_channels", d.attention_head_channels);
  d.groups = j.value("groups", d.groups);
  d.resolution = j.value("resolution", d.resolution);
  d.time_embedding_dim = j.value("time_embedding_dim", d.time_embedding_dim);
  d.sdf_scale = j.value("sdf_scale", d.sdf_scale);
  d.image_offset = j.value("image_offset", d.image_offset);
  d.image_scale = j.value("image_scale", d.image_scale);
  d.validate();
  c = d;
}

int group_count(int channels, int max_groups) {
  for (int g = std::min(channels, max_groups); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

template <class T>
Tensor<T> timestep_embedding(std::span<const int> t, int dim) {
  const int half = dim / 2;
  std::vector<T> v(t.size() * static_cast<std::size_t>(dim));
  for (std::size_t n = 0; n < t.size(); ++n) {
    for (int i = 0; i < half; ++i) {
      const double freq = half > 1 ? std::pow(1e-4, static_cast<double>(i) / (half - 1)) : 1.0;
      const double a = t[n] * freq;
      v[n * dim + i] = static_cast<T>(std::cos(a));
      v[n * dim + half + i] = static_cast<T>(std::sin(a));
    }
  }
  return Tensor<T>::from({static_cast<std::int64_t>(t.size()), dim}, std::move(v));
}

template <class T>
Tensor<T>& UNet<T>::add_param(const std::string& name, Shape shape, double bound) {
  std::vector<T> v(static_cast<std::size_t>(numel(shape)));
  if (bound > 0.0) {
    const auto rng = CounterRng::derive(seed_, "param", params_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(bound * (2.0 * rng.uniform(i) - 1.0));
  }
  params_.emplace_back(name, Tensor<T>::from(std::move(shape), std::move(v), true));
  return params_.back().second;
}

template <class T>
typename UNet<T>::ResBlock UNet<T>::make_res(const std::string& prefix, int in, int out) {
  ResBlock b{params_.size(), in, out};
  const int e = cfg_.time_embedding_dim;
  const double c1 = 1.0 / std::sqrt(27.0 * in);
  const double c2 = 1.0 / std::sqrt(27.0 * out);
  const double le = 1.0 / std::sqrt(static_cast<double>(e));
  add_param(prefix + ".gn1.g", {in}, 0.0);
  add_param(prefix + ".gn1.b", {in}, 0.0);
  add_param(prefix + ".conv1.w", {out, in, 3, 3, 3}, c1);
  add_param(prefix + ".conv1.b", {out}, 0.0);
  add_param(prefix + ".emb_scale.w", {out, e}, le);
  add_param(prefix + ".emb_scale.b", {out}, 0.0);
  add_param(prefix + ".emb_shift.w", {out, e}, le);
  add_param(prefix + ".emb_shift.b", {out}, 0.0);
  add_param(prefix + ".gn2.g", {out}, 0.0);
  add_param(prefix + ".gn2.b", {out}, 0.0);
  add_param(prefix + ".conv2.w", {out, out, 3, 3, 3}, c2);
  add_param(prefix + ".conv2.b", {out}, 0.0);
  if (in != out) {
    add_param(prefix + ".skip.w", {out, in, 1, 1, 1}, 1.0 / std::sqrt(static_cast<double>(in)));
    add_param(prefix + ".skip.b", {out}, 0.0);
  }
  for (auto i : {b.first, b.first + 8}) {
    for (auto& v : params_[i].second.data()) v = T(1);
  }
  return b;
}

template <class T>
typename UNet<T>::AttnBlock UNet<T>::make_attn(const std::string& prefix, int channels) {
  AttnBlock b{params_.size(), channels};
  const int hd = cfg_.attention_heads * cfg_.attention_head_channels;
  add_param(prefix + ".norm.g", {channels}, 0.0);
  add_param(prefix + ".norm.b", {channels}, 0.0);
  add_param(prefix + ".qkv.w", {3 * hd, channels, 1, 1, 1}, 1.0 / std::sqrt(static_cast<double>(channels)));
  add_param(prefix + ".qkv.b", {3 * hd}, 0.0);
  add_param(prefix + ".proj.w", {channels, hd, 1, 1, 1}, 1.0 / std::sqrt(static_cast<double>(hd)));
  add_param(prefix + ".proj.b", {channels}, 0.0);
  for (auto& v : params_[b.first].second.data()) v = T(1);
  return b;
}

template <class T>
UNet<T>::UNet(const DenoiserConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
  cfg_.validate();
  const auto& ch = cfg_.stage_channels;
  const int stages = static_cast<int>(ch.size());
  const int e = cfg_.time_embedding_dim;
  for (int s = 0; s < stages; ++s) {
    if ((1 << s) == cfg_.attention_at_factor) attention_stage_ = s;
  }

  time_first_ = params_.size();
  add_param("time.fc1.w", {e, e}, 1.0 / std::sqrt(static_cast<double>(e)));
  add_param("time.fc1.b", {e}, 0.0);
  add_param("time.fc2.w", {e, e}, 1.0 / std::sqrt(static_cast<double>(e)));
  add_param("time.fc2.b", {e}, 0.0);

  in_conv_ = params_.size();
  add_param("in.w", {ch[0], cfg_.in_channels, 3, 3, 3}, 1.0 / std::sqrt(27.0 * cfg_.in_channels));
  add_param("in.b", {ch[0]}, 0.0);

  int prev = ch[0];
  for (int s = 0; s < stages; ++s) {
    const std::string name = "down" + std::to_string(s);
    down_.push_back(make_res(name + ".res", prev, ch[s]));
    down_attn_.push_back(s == attention_stage_ ? make_attn(name + ".attn", ch[s]) : AttnBlock{});
    prev = ch[s];
  }
  mid1_ = make_res("mid.res1", prev, prev);
  mid_attn_ = make_attn("mid.attn", prev);
  mid2_ = make_res("mid.res2", prev, prev);
  up_.resize(static_cast<std::size_t>(stages));
  up_attn_.resize(static_cast<std::size_t>(stages));
  for (int s = stages - 1; s >= 0; --s) {
    const std::string name = "up" + std::to_string(s);
    up_[static_cast<std::size_t>(s)] = make_res(name + ".res", prev + ch[s], ch[s]);
    if (s == attention_stage_) up_attn_[static_cast<std::size_t>(s)] = make_attn(name + ".attn", ch[s]);
    prev = ch[s];
  }
  out_first_ = params_.size();
  add_param("out.gn.g", {ch[0]}, 0.0);
  add_param("out.gn.b", {ch[0]}, 0.0);
  add_param("out.conv.w", {1, ch[0], 3, 3, 3}, 0.0);
  add_param("out.conv.b", {1}, 0.0);
  for (auto& v : params_[out_first_].second.data()) v = T(1);
}

template <class T>
UNet<T> UNet<T>::clone() const {
  UNet<T> c = *this;
  for (auto& [name, t] : c.params_) t = t.clone();
  return c;
}

template <class T>
std::size_t UNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += static_cast<std::size_t>(t.size());
  return n;
}

template <class T>
Tensor<T>& UNet<T>::parameter(const std::string& name) {
  for (auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw UsageError("no parameter named " + name);
}

template <class T>
Tensor<T> UNet<T>::run_res(const ResBlock& b, const Tensor<T>& x, const Tensor<T>& emb) const {
  const std::size_t i = b.first;
  const int g1 = group_count(b.in, cfg_.groups);
  const int g2 = group_count(b.out, cfg_.groups);
  Tensor<T> h = conv3d(silu(group_norm(x, g1, p(i), p(i + 1))), p(i + 2), p(i + 3));
  const Tensor<T> scale = linear(emb, p(i + 4), p(i + 5));
  const Tensor<T> shift = linear(emb, p(i + 6), p(i + 7));
  h = modulate(group_norm(h, g2, p(i + 8), p(i + 9)), scale, shift);
  h = conv3d(silu(h), p(i + 10), p(i + 11));
  const Tensor<T> skip = b.in == b.out ? x : conv3d(x, p(i + 12), p(i + 13));
  return add(skip, h);
}

template <class T>
Tensor<T> UNet<T>::run_attn(const AttnBlock& b, const Tensor<T>& x) const {
  const std::size_t i = b.first;
  const Tensor<T> h = group_norm(x, group_count(b.channels, cfg_.groups), p(i), p(i + 1));
  const Tensor<T> a = attention(conv3d(h, p(i + 2), p(i + 3)), cfg_.attention_heads);
  return add(x, conv3d(a, p(i + 4), p(i + 5)));
}

template <class T>
Tensor<T> UNet<T>::forward(const Tensor<T>& x, std::span<const int> t) const {
  const auto r = cfg_.resolution;
  if (!x.defined() || x.rank() != 5 || x.dim(1) != cfg_.in_channels || x.dim(2) != r || x.dim(3) != r ||
      x.dim(4) != r) {
    throw ShapeMismatch("unet: expected input [N, " + std::to_string(cfg_.in_channels) + ", " +
                        std::to_string(r) + ", " + std::to_string(r) + ", " + std::to_string(r) + "], got " +
                        (x.defined() ? shape_string(x.shape()) : std::string("undefined")));
  }
  if (static_cast<std::int64_t>(t.size()) != x.dim(0)) throw ShapeMismatch("unet: one timestep per batch entry");

  const std::size_t tf = time_first_;
  const Tensor<T> temb = timestep_embedding<T>(t, cfg_.time_embedding_dim);
  const Tensor<T> emb = silu(linear(silu(linear(temb, p(tf), p(tf + 1))), p(tf + 2), p(tf + 3)));

  const int stages = static_cast<int>(cfg_.stage_channels.size());
  Tensor<T> h = conv3d(x, p(in_conv_), p(in_conv_ + 1));
  std::vector<Tensor<T>> skips;
  for (int s = 0; s < stages; ++s) {
    h = run_res(down_[static_cast<std::size_t>(s)], h, emb);
    if (down_attn_[static_cast<std::size_t>(s)].channels) h = run_attn(down_attn_[static_cast<std::size_t>(s)], h);
    skips.push_back(h);
    if (s + 1 < stages) h = avg_pool2(h);
  }
  h = run_res(mid1_, h, emb);
  h = run_attn(mid_attn_, h);
  h = run_res(mid2_, h, emb);
  for (int s = stages - 1; s >= 0; --s) {
    h = run_res(up_[static_cast<std::size_t>(s)], concat_channels(h, skips[static_cast<std::size_t>(s)]), emb);
    if (up_attn_[static_cast<std::size_t>(s)].channels) h = run_attn(up_attn_[static_cast<std::size_t>(s)], h);
    if (s > 0) h = upsample2(h);
  }
  const std::size_t o = out_first_;
  h = silu(group_norm(h, group_count(cfg_.stage_channels[0], cfg_.groups), p(o), p(o + 1)));
  return conv3d(h, p(o + 2), p(o + 3));
}

template Tensor<float> timestep_embedding<float>(std::span<const int>, int);
template Tensor<double> timestep_embedding<double>(std::span<const int>, int);
template class UNet<float>;
template class UNet<double>;

}  // namespace c2v::nn
