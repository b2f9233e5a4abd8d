#pragma once

#include "c2v/nn/tensor.hpp"

// Differentiable ops. Volumes are [N, C, D, H, W], feature rows are [N, F].
namespace c2v::nn {

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> silu(const Tensor<T>& x);
/// Sum of all elements, shape [1].
template <class T> Tensor<T> sum(const Tensor<T>& x);
/// mean |pred - target|, shape [1].
template <class T> Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Concatenation along axis 1.
template <class T> Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// x [N, I], w [O, I], b [O] (may be undefined) -> [N, O].
template <class T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

/// Cubic kernel of edge 1 or 3 with zero padding k/2, stride 1.
/// w [Co, Ci, k, k, k], b [Co] (may be undefined).
template <class T> Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

/// 2x2x2 mean pooling; spatial dims must be even.
template <class T> Tensor<T> avg_pool2(const Tensor<T>& x);
/// Nearest-neighbour 2x upsampling.
template <class T> Tensor<T> upsample2(const Tensor<T>& x);

/// Group normalization over (C / groups) channels and all spatial positions,
/// followed by the per-channel affine gamma, beta [C].
template <class T>
Tensor<T> group_norm(const Tensor<T>& x, int groups, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = 1e-5);

/// x * (1 + scale) + shift with scale, shift [N, C] broadcast over space.
template <class T> Tensor<T> modulate(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift);

/// Multi-head self-attention over flattened spatial positions.
/// qkv [N, 3 H d, ...] holds queries, keys, values (head-major within each)
/// and the result is [N, H d, ...]. Keys are accumulated in a content-defined
/// order, so permuting key/value positions together leaves the output
/// bit-identical.
template <class T> Tensor<T> attention(const Tensor<T>& qkv, int heads);

}  // namespace c2v::nn
