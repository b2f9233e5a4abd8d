#include "c2v/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>

#include "c2v/common/error.hpp"
#include "c2v/common/parallel.hpp"

namespace c2v::nn {
namespace {

template <class T>
using RMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<RMat<T>>;
template <class T>
using CMapM = Eigen::Map<const RMat<T>>;
template <class T>
using StridedMap = Eigen::Map<RMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using CStridedMap = Eigen::Map<const RMat<T>, 0, Eigen::OuterStride<>>;

template <class T>
void require_defined(const Tensor<T>& t, const char* op) {
  if (!t.defined()) throw UsageError(std::string(op) + ": undefined input");
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw ShapeMismatch(std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

template <class T>
void require_volume(const Tensor<T>& x, const char* op) {
  require_defined(x, op);
  if (x.rank() != 5) throw ShapeMismatch(std::string(op) + ": expected [N, C, D, H, W], got " + shape_string(x.shape()));
}

template <class T>
std::span<T> grad_of(const Tensor<T>& t) {
  return t.node()->ensure_grad();
}

template <class T>
bool wants(const Tensor<T>& t) {
  return t.defined() && t.requires_grad();
}

// Spatial size of a tensor with layout [N, C, ...].
template <class T>
std::int64_t spatial_size(const Tensor<T>& x) {
  std::int64_t s = 1;
  for (std::size_t i = 2; i < x.rank(); ++i) s *= x.dim(i);
  return s;
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  auto out = make_result<T>(a.shape(), {a, b});
  auto o = out.data();
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
  if (out.requires_grad()) {
    out.node()->backward_fn = [a, b](Node<T>& self) {
      for (const auto* p : {&a, &b}) {
        if (!wants(*p)) continue;
        auto g = grad_of(*p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  auto out = make_result<T>(a.shape(), {a, b});
  auto o = out.data();
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  if (out.requires_grad()) {
    out.node()->backward_fn = [a, b](Node<T>& self) {
      if (wants(a)) {
        auto g = grad_of(a);
        auto bv = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
      }
      if (wants(b)) {
        auto g = grad_of(b);
        auto av = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> silu(const Tensor<T>& x) {
  require_defined(x, "silu");
  auto out = make_result<T>(x.shape(), {x});
  auto o = out.data();
  auto xv = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] / (T(1) + std::exp(-xv[i]));
  if (out.requires_grad()) {
    out.node()->backward_fn = [x](Node<T>& self) {
      auto g = grad_of(x);
      auto xv = x.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T s = T(1) / (T(1) + std::exp(-xv[i]));
        g[i] += self.grad[i] * s * (T(1) + xv[i] * (T(1) - s));
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  require_defined(x, "sum");
  auto out = make_result<T>({1}, {x});
  out.data()[0] = static_cast<T>(pairwise_sum(x.data()));
  if (out.requires_grad()) {
    out.node()->backward_fn = [x](Node<T>& self) {
      auto g = grad_of(x);
      for (auto& v : g) v += self.grad[0];
    };
  }
  return out;
}

template <class T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "l1_loss");
  if (pred.size() == 0) throw ShapeMismatch("l1_loss: empty input");
  auto out = make_result<T>({1}, {pred, target});
  auto p = pred.data();
  auto t = target.data();
  std::vector<double> diff(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) diff[i] = std::abs(static_cast<double>(p[i]) - t[i]);
  out.data()[0] = static_cast<T>(pairwise_sum(std::span<const double>(diff)) / static_cast<double>(p.size()));
  if (out.requires_grad()) {
    out.node()->backward_fn = [pred, target](Node<T>& self) {
      auto p = pred.data();
      auto t = target.data();
      const T w = self.grad[0] / static_cast<T>(p.size());
      auto sign = [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); };
      if (wants(pred)) {
        auto g = grad_of(pred);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += w * sign(p[i] - t[i]);
      }
      if (wants(target)) {
        auto g = grad_of(target);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= w * sign(p[i] - t[i]);
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_defined(a, "concat");
  require_defined(b, "concat");
  if (a.rank() < 2 || a.rank() != b.rank() || a.dim(0) != b.dim(0) ||
      !std::equal(a.shape().begin() + 2, a.shape().end(), b.shape().begin() + 2)) {
    throw ShapeMismatch("concat: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Shape shape = a.shape();
  shape[1] += b.dim(1);
  auto out = make_result<T>(shape, {a, b});
  const std::int64_t n = a.dim(0);
  const std::int64_t sa = a.dim(1) * spatial_size(a);
  const std::int64_t sb = b.dim(1) * spatial_size(b);
  auto o = out.data();
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(a.data().begin() + i * sa, sa, o.begin() + i * (sa + sb));
    std::copy_n(b.data().begin() + i * sb, sb, o.begin() + i * (sa + sb) + sa);
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [a, b, n, sa, sb](Node<T>& self) {
      for (std::int64_t i = 0; i < n; ++i) {
        const T* g = self.grad.data() + i * (sa + sb);
        if (wants(a)) {
          auto ga = grad_of(a);
          for (std::int64_t j = 0; j < sa; ++j) ga[i * sa + j] += g[j];
        }
        if (wants(b)) {
          auto gb = grad_of(b);
          for (std::int64_t j = 0; j < sb; ++j) gb[i * sb + j] += g[sa + j];
        }
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_defined(x, "linear");
  require_defined(w, "linear");
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1) || (b.defined() && b.shape() != Shape{w.dim(0)})) {
    throw ShapeMismatch("linear: x " + shape_string(x.shape()) + ", w " + shape_string(w.shape()));
  }
  const auto n = x.dim(0);
  const auto in = x.dim(1);
  const auto o = w.dim(0);
  auto out = make_result<T>({n, o}, {x, w, b});
  MapM<T> y(out.data().data(), n, o);
  CMapM<T> xm(x.data().data(), n, in);
  CMapM<T> wm(w.data().data(), o, in);
  y.noalias() = xm * wm.transpose();
  if (b.defined()) {
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < o; ++j) y(i, j) += b.data()[static_cast<std::size_t>(j)];
    }
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [x, w, b, n, in, o](Node<T>& self) {
      CMapM<T> gy(self.grad.data(), n, o);
      if (wants(x)) MapM<T>(grad_of(x).data(), n, in).noalias() += gy * CMapM<T>(w.data().data(), o, in);
      if (wants(w)) MapM<T>(grad_of(w).data(), o, in).noalias() += gy.transpose() * CMapM<T>(x.data().data(), n, in);
      if (wants(b)) {
        auto gb = grad_of(b);
        for (std::int64_t i = 0; i < n; ++i) {
          for (std::int64_t j = 0; j < o; ++j) gb[static_cast<std::size_t>(j)] += gy(i, j);
        }
      }
    };
  }
  return out;
}

namespace {

struct ConvGeometry {
  std::int64_t n, ci, co, d, h, w, k, pad;
  std::int64_t spatial() const { return d * h * w; }
  std::int64_t rows() const { return ci * k * k * k; }
  // z-planes per im2col chunk
  std::int64_t chunk_planes() const { return std::clamp<std::int64_t>(8192 / (h * w), 1, d); }
};

// cols[r, p] for output voxels in planes [z0, z1), r = ((c k + dz) k + dy) k + dx.
template <class T>
void im2col(const T* x, const ConvGeometry& g, std::int64_t z0, std::int64_t z1, T* cols) {
  const std::int64_t plane = g.h * g.w;
  const std::int64_t ncols = (z1 - z0) * plane;
  std::int64_t r = 0;
  for (std::int64_t c = 0; c < g.ci; ++c) {
    const T* xc = x + c * g.spatial();
    for (std::int64_t dz = 0; dz < g.k; ++dz) {
      for (std::int64_t dy = 0; dy < g.k; ++dy) {
        for (std::int64_t dx = 0; dx < g.k; ++dx, ++r) {
          T* row = cols + r * ncols;
          for (std::int64_t z = z0; z < z1; ++z) {
            const std::int64_t zs = z + dz - g.pad;
            T* prow = row + (z - z0) * plane;
            if (zs < 0 || zs >= g.d) {
              std::fill_n(prow, plane, T(0));
              continue;
            }
            for (std::int64_t y = 0; y < g.h; ++y) {
              const std::int64_t ys = y + dy - g.pad;
              T* line = prow + y * g.w;
              if (ys < 0 || ys >= g.h) {
                std::fill_n(line, g.w, T(0));
                continue;
              }
              const T* src = xc + (zs * g.h + ys) * g.w;
              const std::int64_t off = dx - g.pad;
              const std::int64_t lo = std::max<std::int64_t>(0, -off);
              const std::int64_t hi = std::min<std::int64_t>(g.w, g.w - off);
              std::fill_n(line, lo, T(0));
              std::copy(src + lo + off, src + hi + off, line + lo);
              std::fill(line + hi, line + g.w, T(0));
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* cols, const ConvGeometry& g, std::int64_t z0, std::int64_t z1, T* gx) {
  const std::int64_t plane = g.h * g.w;
  const std::int64_t ncols = (z1 - z0) * plane;
  std::int64_t r = 0;
  for (std::int64_t c = 0; c < g.ci; ++c) {
    T* gc = gx + c * g.spatial();
    for (std::int64_t dz = 0; dz < g.k; ++dz) {
      for (std::int64_t dy = 0; dy < g.k; ++dy) {
        for (std::int64_t dx = 0; dx < g.k; ++dx, ++r) {
          const T* row = cols + r * ncols;
          for (std::int64_t z = z0; z < z1; ++z) {
            const std::int64_t zs = z + dz - g.pad;
            if (zs < 0 || zs >= g.d) continue;
            for (std::int64_t y = 0; y < g.h; ++y) {
              const std::int64_t ys = y + dy - g.pad;
              if (ys < 0 || ys >= g.h) continue;
              const T* line = row + (z - z0) * plane + y * g.w;
              T* dst = gc + (zs * g.h + ys) * g.w;
              const std::int64_t off = dx - g.pad;
              const std::int64_t lo = std::max<std::int64_t>(0, -off);
              const std::int64_t hi = std::min<std::int64_t>(g.w, g.w - off);
              for (std::int64_t x = lo; x < hi; ++x) dst[x + off] += line[x];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_volume(x, "conv3d");
  require_defined(w, "conv3d");
  if (w.rank() != 5 || w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3) || w.dim(2) != w.dim(4) ||
      (w.dim(2) != 1 && w.dim(2) != 3)) {
    throw ShapeMismatch("conv3d: x " + shape_string(x.shape()) + ", w " + shape_string(w.shape()));
  }
  if (b.defined() && b.shape() != Shape{w.dim(0)}) throw ShapeMismatch("conv3d: bias " + shape_string(b.shape()));
  const ConvGeometry g{x.dim(0), x.dim(1), w.dim(0), x.dim(2), x.dim(3), x.dim(4), w.dim(2), w.dim(2) / 2};
  auto out = make_result<T>({g.n, g.co, g.d, g.h, g.w}, {x, w, b});
  const std::int64_t S = g.spatial();
  const std::int64_t K = g.rows();
  const T* xv = x.data().data();
  T* ov = out.data().data();
  CMapM<T> wm(w.data().data(), g.co, K);

  parallel_for(static_cast<std::size_t>(g.n), [&](std::size_t begin, std::size_t end) {
    std::vector<T> cols;
    for (auto n = static_cast<std::int64_t>(begin); n < static_cast<std::int64_t>(end); ++n) {
      const T* xn = xv + n * g.ci * S;
      T* on = ov + n * g.co * S;
      if (g.k == 1) {
        MapM<T>(on, g.co, S).noalias() = wm * CMapM<T>(xn, g.ci, S);
      } else {
        const std::int64_t cp = g.chunk_planes();
        for (std::int64_t z0 = 0; z0 < g.d; z0 += cp) {
          const std::int64_t z1 = std::min(g.d, z0 + cp);
          const std::int64_t ncols = (z1 - z0) * g.h * g.w;
          cols.resize(static_cast<std::size_t>(K * ncols));
          im2col(xn, g, z0, z1, cols.data());
          StridedMap<T>(on + z0 * g.h * g.w, g.co, ncols, Eigen::OuterStride<>(S)).noalias() =
              wm * CMapM<T>(cols.data(), K, ncols);
        }
      }
      if (b.defined()) {
        for (std::int64_t c = 0; c < g.co; ++c) {
          const T bc = b.data()[static_cast<std::size_t>(c)];
          for (std::int64_t p = 0; p < S; ++p) on[c * S + p] += bc;
        }
      }
    }
  }, 1);

  if (out.requires_grad()) {
    out.node()->backward_fn = [x, w, b, g](Node<T>& self) {
      const std::int64_t S = g.spatial();
      const std::int64_t K = g.rows();
      const bool need_x = wants(x);
      const bool need_w = wants(w);
      T* gx = need_x ? grad_of(x).data() : nullptr;
      CMapM<T> wm(w.data().data(), g.co, K);
      // One weight-gradient buffer per sample, reduced in sample order.
      std::vector<RMat<T>> gw(need_w ? static_cast<std::size_t>(g.n) : 0);
      parallel_for(static_cast<std::size_t>(g.n), [&](std::size_t begin, std::size_t end) {
        std::vector<T> cols;
        std::vector<T> gcols;
        for (auto n = static_cast<std::int64_t>(begin); n < static_cast<std::int64_t>(end); ++n) {
          const T* xn = x.data().data() + n * g.ci * S;
          const T* gon = self.grad.data() + n * g.co * S;
          if (need_w) gw[static_cast<std::size_t>(n)] = RMat<T>::Zero(g.co, K);
          if (g.k == 1) {
            CMapM<T> go(gon, g.co, S);
            if (need_w) gw[static_cast<std::size_t>(n)].noalias() += go * CMapM<T>(xn, g.ci, S).transpose();
            if (need_x) MapM<T>(gx + n * g.ci * S, g.ci, S).noalias() += wm.transpose() * go;
            continue;
          }
          const std::int64_t cp = g.chunk_planes();
          for (std::int64_t z0 = 0; z0 < g.d; z0 += cp) {
            const std::int64_t z1 = std::min(g.d, z0 + cp);
            const std::int64_t ncols = (z1 - z0) * g.h * g.w;
            CStridedMap<T> go(gon + z0 * g.h * g.w, g.co, ncols, Eigen::OuterStride<>(S));
            if (need_w) {
              cols.resize(static_cast<std::size_t>(K * ncols));
              im2col(xn, g, z0, z1, cols.data());
              gw[static_cast<std::size_t>(n)].noalias() += go * CMapM<T>(cols.data(), K, ncols).transpose();
            }
            if (need_x) {
              gcols.resize(static_cast<std::size_t>(K * ncols));
              MapM<T>(gcols.data(), K, ncols).noalias() = wm.transpose() * go;
              col2im_add(gcols.data(), g, z0, z1, gx + n * g.ci * S);
            }
          }
        }
      }, 1);
      if (need_w) {
        MapM<T> gwm(grad_of(w).data(), g.co, K);
        for (const auto& part : gw) gwm += part;
      }
      if (wants(b)) {
        auto gb = grad_of(b);
        for (std::int64_t c = 0; c < g.co; ++c) {
          double acc = 0.0;
          for (std::int64_t n = 0; n < g.n; ++n) {
            acc += pairwise_sum(std::span<const T>(self.grad.data() + (n * g.co + c) * S, static_cast<std::size_t>(S)));
          }
          gb[static_cast<std::size_t>(c)] += static_cast<T>(acc);
        }
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  require_volume(x, "avg_pool2");
  const auto nc = x.dim(0) * x.dim(1);
  const auto d = x.dim(2), h = x.dim(3), w = x.dim(4);
  if (d % 2 || h % 2 || w % 2) throw ShapeMismatch("avg_pool2: odd spatial size " + shape_string(x.shape()));
  auto out = make_result<T>({x.dim(0), x.dim(1), d / 2, h / 2, w / 2}, {x});
  const auto od = d / 2, oh = h / 2, ow = w / 2;
  auto xv = x.data();
  auto o = out.data();
  for (std::int64_t c = 0; c < nc; ++c) {
    for (std::int64_t z = 0; z < od; ++z) {
      for (std::int64_t y = 0; y < oh; ++y) {
        for (std::int64_t q = 0; q < ow; ++q) {
          T acc = 0;
          for (int a = 0; a < 2; ++a) {
            for (int bb = 0; bb < 2; ++bb) {
              const std::size_t base = static_cast<std::size_t>(((c * d + 2 * z + a) * h + 2 * y + bb) * w + 2 * q);
              acc += xv[base] + xv[base + 1];
            }
          }
          o[static_cast<std::size_t>(((c * od + z) * oh + y) * ow + q)] = acc * T(0.125);
        }
      }
    }
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [x, nc, d, h, w](Node<T>& self) {
      auto g = grad_of(x);
      const auto od = d / 2, oh = h / 2, ow = w / 2;
      for (std::int64_t c = 0; c < nc; ++c) {
        for (std::int64_t z = 0; z < d; ++z) {
          for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t q = 0; q < w; ++q) {
              g[static_cast<std::size_t>(((c * d + z) * h + y) * w + q)] +=
                  T(0.125) * self.grad[static_cast<std::size_t>(((c * od + z / 2) * oh + y / 2) * ow + q / 2)];
            }
          }
        }
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> upsample2(const Tensor<T>& x) {
  require_volume(x, "upsample2");
  const auto nc = x.dim(0) * x.dim(1);
  const auto d = x.dim(2), h = x.dim(3), w = x.dim(4);
  auto out = make_result<T>({x.dim(0), x.dim(1), 2 * d, 2 * h, 2 * w}, {x});
  auto xv = x.data();
  auto o = out.data();
  std::size_t i = 0;
  for (std::int64_t c = 0; c < nc; ++c) {
    for (std::int64_t z = 0; z < 2 * d; ++z) {
      for (std::int64_t y = 0; y < 2 * h; ++y) {
        const std::size_t src = static_cast<std::size_t>(((c * d + z / 2) * h + y / 2) * w);
        for (std::int64_t q = 0; q < 2 * w; ++q) o[i++] = xv[src + static_cast<std::size_t>(q / 2)];
      }
    }
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [x, nc, d, h, w](Node<T>& self) {
      auto g = grad_of(x);
      std::size_t i = 0;
      for (std::int64_t c = 0; c < nc; ++c) {
        for (std::int64_t z = 0; z < 2 * d; ++z) {
          for (std::int64_t y = 0; y < 2 * h; ++y) {
            const std::size_t dst = static_cast<std::size_t>(((c * d + z / 2) * h + y / 2) * w);
            for (std::int64_t q = 0; q < 2 * w; ++q) g[dst + static_cast<std::size_t>(q / 2)] += self.grad[i++];
          }
        }
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> group_norm(const Tensor<T>& x, int groups, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  require_defined(x, "group_norm");
  if (x.rank() < 2) throw ShapeMismatch("group_norm: rank < 2");
  const auto n = x.dim(0);
  const auto c = x.dim(1);
  if (groups < 1 || c % groups != 0) {
    throw ShapeMismatch("group_norm: " + std::to_string(c) + " channels not divisible into " +
                        std::to_string(groups) + " groups");
  }
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) throw ShapeMismatch("group_norm: affine shape");
  const auto S = spatial_size(x);
  const auto cg = c / groups;
  const auto m = cg * S;
  auto out = make_result<T>(x.shape(), {x, gamma, beta});
  auto xhat = std::make_shared<std::vector<T>>(x.data().size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * groups));
  auto xv = x.data();
  auto o = out.data();
  for (std::int64_t i = 0; i < n * groups; ++i) {
    const std::span<const T> blk = xv.subspan(static_cast<std::size_t>(i * m), static_cast<std::size_t>(m));
    const double mean = pairwise_sum(blk) / static_cast<double>(m);
    double var = 0.0;
    for (T v : blk) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(i)] = is;
    for (std::int64_t j = 0; j < m; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i * m + j);
      const T xh = static_cast<T>((xv[idx] - mean) * is);
      (*xhat)[idx] = xh;
      const auto ch = static_cast<std::size_t>((i % groups) * cg + j / S);
      o[idx] = xh * gamma.data()[ch] + beta.data()[ch];
    }
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [x, gamma, beta, groups, n, S, cg, m, xhat, inv_std](Node<T>& self) {
      const auto& xh = *xhat;
      std::vector<T> gxh(static_cast<std::size_t>(m));
      for (std::int64_t i = 0; i < n * groups; ++i) {
        double s1 = 0.0, s2 = 0.0;
        for (std::int64_t j = 0; j < m; ++j) {
          const std::size_t idx = static_cast<std::size_t>(i * m + j);
          const auto ch = static_cast<std::size_t>((i % groups) * cg + j / S);
          const T gy = self.grad[idx];
          if (wants(gamma)) grad_of(gamma)[ch] += gy * xh[idx];
          if (wants(beta)) grad_of(beta)[ch] += gy;
          gxh[static_cast<std::size_t>(j)] = gy * gamma.data()[ch];
          s1 += gxh[static_cast<std::size_t>(j)];
          s2 += static_cast<double>(gxh[static_cast<std::size_t>(j)]) * xh[idx];
        }
        if (!wants(x)) continue;
        auto gx = grad_of(x);
        const double mean1 = s1 / static_cast<double>(m);
        const double mean2 = s2 / static_cast<double>(m);
        const double is = (*inv_std)[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < m; ++j) {
          const std::size_t idx = static_cast<std::size_t>(i * m + j);
          gx[idx] += static_cast<T>(is * (gxh[static_cast<std::size_t>(j)] - mean1 - xh[idx] * mean2));
        }
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> modulate(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift) {
  require_defined(x, "modulate");
  const Shape nc{x.dim(0), x.dim(1)};
  if (scale.shape() != nc || shift.shape() != nc) {
    throw ShapeMismatch("modulate: scale/shift must be " + shape_string(nc));
  }
  const auto S = spatial_size(x);
  const auto rows = x.dim(0) * x.dim(1);
  auto out = make_result<T>(x.shape(), {x, scale, shift});
  auto xv = x.data();
  auto o = out.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T a = T(1) + scale.data()[static_cast<std::size_t>(r)];
    const T bb = shift.data()[static_cast<std::size_t>(r)];
    for (std::int64_t p = 0; p < S; ++p) o[static_cast<std::size_t>(r * S + p)] = xv[static_cast<std::size_t>(r * S + p)] * a + bb;
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [x, scale, shift, S, rows](Node<T>& self) {
      for (std::int64_t r = 0; r < rows; ++r) {
        const std::span<const T> gy(self.grad.data() + r * S, static_cast<std::size_t>(S));
        if (wants(x)) {
          auto gx = grad_of(x);
          const T a = T(1) + scale.data()[static_cast<std::size_t>(r)];
          for (std::int64_t p = 0; p < S; ++p) gx[static_cast<std::size_t>(r * S + p)] += gy[static_cast<std::size_t>(p)] * a;
        }
        if (wants(scale)) {
          double acc = 0.0;
          for (std::int64_t p = 0; p < S; ++p) acc += static_cast<double>(gy[static_cast<std::size_t>(p)]) * x.data()[static_cast<std::size_t>(r * S + p)];
          grad_of(scale)[static_cast<std::size_t>(r)] += static_cast<T>(acc);
        }
        if (wants(shift)) grad_of(shift)[static_cast<std::size_t>(r)] += static_cast<T>(pairwise_sum(gy));
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> attention(const Tensor<T>& qkv, int heads) {
  require_defined(qkv, "attention");
  if (qkv.rank() < 3 || heads < 1 || qkv.dim(1) % (3 * heads) != 0) {
    throw ShapeMismatch("attention: channels of " + shape_string(qkv.shape()) + " not divisible by 3 x " +
                        std::to_string(heads) + " heads");
  }
  const auto n = qkv.dim(0);
  const auto hd = qkv.dim(1) / 3;
  const auto dh = hd / heads;
  const auto S = spatial_size(qkv);
  Shape shape = qkv.shape();
  shape[1] = hd;
  auto out = make_result<T>(shape, {qkv});
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  // probs[(n, h)] is S x S, row = query.
  auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n * heads * S * S));
  const T* in = qkv.data().data();
  T* o = out.data().data();
  std::vector<std::int64_t> order(static_cast<std::size_t>(S));
  std::vector<double> score(static_cast<std::size_t>(S));
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t h = 0; h < heads; ++h) {
      const T* q = in + (b * 3 * hd + h * dh) * S;
      const T* k = in + (b * 3 * hd + hd + h * dh) * S;
      const T* v = in + (b * 3 * hd + 2 * hd + h * dh) * S;
      T* oh = o + (b * hd + h * dh) * S;
      T* pr = probs->data() + (b * heads + h) * S * S;
      auto column_less = [&](const T* m, std::int64_t i, std::int64_t j) {
        for (std::int64_t c = 0; c < dh; ++c) {
          if (m[c * S + i] != m[c * S + j]) return m[c * S + i] < m[c * S + j];
        }
        return false;
      };
      for (std::int64_t i = 0; i < S; ++i) {
        for (std::int64_t j = 0; j < S; ++j) {
          double s = 0.0;
          for (std::int64_t c = 0; c < dh; ++c) s += static_cast<double>(q[c * S + i]) * k[c * S + j];
          score[static_cast<std::size_t>(j)] = s * scale;
        }
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t c) {
          const double sa = score[static_cast<std::size_t>(a)];
          const double sc = score[static_cast<std::size_t>(c)];
          if (sa != sc) return sa > sc;
          if (column_less(v, a, c)) return true;
          if (column_less(v, c, a)) return false;
          return column_less(k, a, c);
        });
        const double top = score[static_cast<std::size_t>(order[0])];
        double denom = 0.0;
        for (auto j : order) denom += std::exp(score[static_cast<std::size_t>(j)] - top);
        for (std::int64_t c = 0; c < dh; ++c) {
          double acc = 0.0;
          for (auto j : order) acc += std::exp(score[static_cast<std::size_t>(j)] - top) * v[c * S + j];
          oh[c * S + i] = static_cast<T>(acc / denom);
        }
        for (std::int64_t j = 0; j < S; ++j) {
          pr[i * S + j] = static_cast<T>(std::exp(score[static_cast<std::size_t>(j)] - top) / denom);
        }
      }
    }
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [qkv, heads, n, hd, dh, S, scale, probs](Node<T>& self) {
      auto g = grad_of(qkv);
      const T* in = qkv.data().data();
      const T sc = static_cast<T>(scale);
      for (std::int64_t b = 0; b < n; ++b) {
        for (std::int64_t h = 0; h < heads; ++h) {
          const std::int64_t qo = (b * 3 * hd + h * dh) * S;
          const std::int64_t ko = qo + hd * S;
          const std::int64_t vo = qo + 2 * hd * S;
          CMapM<T> Q(in + qo, dh, S), K(in + ko, dh, S), V(in + vo, dh, S);
          CMapM<T> A(probs->data() + (b * heads + h) * S * S, S, S);
          CMapM<T> gO(self.grad.data() + (b * hd + h * dh) * S, dh, S);
          MapM<T>(g.data() + vo, dh, S).noalias() += gO * A;
          RMat<T> gA = gO.transpose() * V;
          RMat<T> gS = A.cwiseProduct(gA);
          const Eigen::Matrix<T, Eigen::Dynamic, 1> rs = gS.rowwise().sum();
          gS -= A.cwiseProduct(rs.replicate(1, S));
          MapM<T>(g.data() + qo, dh, S).noalias() += sc * (K * gS.transpose());
          MapM<T>(g.data() + ko, dh, S).noalias() += sc * (Q * gS);
        }
      }
    };
  }
  return out;
}

#define C2V_INSTANTIATE_OPS(T)                                                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> silu(const Tensor<T>&);                                                       \
  template Tensor<T> sum(const Tensor<T>&);                                                        \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> conv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> avg_pool2(const Tensor<T>&);                                                  \
  template Tensor<T> upsample2(const Tensor<T>&);                                                  \
  template Tensor<T> group_norm(const Tensor<T>&, int, const Tensor<T>&, const Tensor<T>&, double); \
  template Tensor<T> modulate(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> attention(const Tensor<T>&, int);

C2V_INSTANTIATE_OPS(float)
C2V_INSTANTIATE_OPS(double)

}  // namespace c2v::nn
