#include "ian/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ian/gemm.hpp"

namespace ian {

namespace {

// Reusable per-thread scratch; conv calls never nest.
template <typename T>
std::vector<T>& scratch(int slot, std::size_t size) {
  thread_local std::vector<T> buffers[3];
  auto& b = buffers[slot];
  if (b.size() < size) b.resize(size);
  return b;
}

struct ConvGeom {
  std::int64_t cin, h, w, cout, k, stride, dil, pad, ho, wo;
  std::int64_t kdim() const { return cin * k * k; }
  std::int64_t pixels() const { return ho * wo; }
};

template <typename T>
void im2col(const ConvGeom& g, const T* x, T* col) {
  const std::int64_t P = g.pixels();
  for (std::int64_t ci = 0; ci < g.cin; ++ci)
    for (std::int64_t ky = 0; ky < g.k; ++ky)
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((ci * g.k + ky) * g.k + kx) * P;
        const T* plane = x + ci * g.h * g.w;
        const std::int64_t offy = ky * g.dil - g.pad;
        const std::int64_t offx = kx * g.dil - g.pad;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          T* dst = row + oy * g.wo;
          const std::int64_t iy = oy * g.stride + offy;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(dst, g.wo, T(0));
            continue;
          }
          const T* src = plane + iy * g.w;
          if (g.stride == 1) {
            for (std::int64_t ox = 0; ox < g.wo; ++ox) {
              const std::int64_t ix = ox + offx;
              dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
            }
          } else {
            for (std::int64_t ox = 0; ox < g.wo; ++ox) {
              const std::int64_t ix = ox * g.stride + offx;
              dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
            }
          }
        }
      }
}

template <typename T>
void col2im_add(const ConvGeom& g, const T* col, T* x) {
  const std::int64_t P = g.pixels();
  for (std::int64_t ci = 0; ci < g.cin; ++ci)
    for (std::int64_t ky = 0; ky < g.k; ++ky)
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((ci * g.k + ky) * g.k + kx) * P;
        T* plane = x + ci * g.h * g.w;
        const std::int64_t offy = ky * g.dil - g.pad;
        const std::int64_t offx = kx * g.dil - g.pad;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride + offy;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + oy * g.wo;
          T* dst = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride + offx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernel, const BasicTensor<T>& bias,
                      int stride, int dilation) {
  check(x.rank() == 4, "conv2d: input must be [N,C,H,W], got " + shape_str(x.shape()));
  check(kernel.rank() == 4 && kernel.dim(2) == kernel.dim(3) && kernel.dim(2) % 2 == 1,
        "conv2d: kernel must be [out,in,k,k] with odd k");
  check(x.dim(1) == kernel.dim(1), "conv2d: input has " + std::to_string(x.dim(1)) +
                                       " channels, kernel expects " + std::to_string(kernel.dim(1)));
  check(stride >= 1 && dilation >= 1, "conv2d: stride and dilation must be positive");
  const bool has_bias = bias.defined();
  if (has_bias) check(bias.numel() == static_cast<std::size_t>(kernel.dim(0)), "conv2d: bias size mismatch");

  ConvGeom g{};
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = kernel.dim(0);
  g.k = kernel.dim(2);
  g.stride = stride;
  g.dil = dilation;
  g.pad = dilation * (g.k - 1) / 2;
  g.ho = (g.h - 1) / stride + 1;
  g.wo = (g.w - 1) / stride + 1;
  const std::int64_t n = x.dim(0);
  const std::int64_t K = g.kdim();
  const std::int64_t P = g.pixels();

  std::vector<T> out(static_cast<std::size_t>(n * g.cout * P));
  {
    auto& col = scratch<T>(0, static_cast<std::size_t>(K * P));
    const T* wd = kernel.data().data();
    for (std::int64_t s = 0; s < n; ++s) {
      im2col(g, x.data().data() + s * g.cin * g.h * g.w, col.data());
      T* o = out.data() + s * g.cout * P;
      kernels::gemm<T>(g.cout, P, K, wd, K, col.data(), P, o, P);
      if (has_bias) {
        const auto bd = bias.data();
        for (std::int64_t c = 0; c < g.cout; ++c)
          for (std::int64_t p = 0; p < P; ++p) o[c * P + p] += bd[c];
      }
    }
  }

  auto xn = x.node();
  auto kn = kernel.node();
  detail::NodePtr<T> bn = has_bias ? bias.node() : nullptr;
  std::vector<BasicTensor<T>> inputs{x, kernel};
  if (has_bias) inputs.push_back(bias);
  return make_result<T>({n, g.cout, g.ho, g.wo}, std::move(out), inputs, [g, n, xn, kn, bn](detail::Node<T>& self) {
    const std::int64_t K = g.kdim();
    const std::int64_t P = g.pixels();
    const T* gd = self.grad.data();
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (std::int64_t s = 0; s < n; ++s)
        for (std::int64_t c = 0; c < g.cout; ++c) {
          T acc = 0;
          const T* row = gd + (s * g.cout + c) * P;
          for (std::int64_t p = 0; p < P; ++p) acc += row[p];
          bn->grad[c] += acc;
        }
    }
    if (kn->requires_grad) {
      kn->ensure_grad();
      auto& col = scratch<T>(0, static_cast<std::size_t>(K * P));
      auto& colt = scratch<T>(1, static_cast<std::size_t>(K * P));
      auto& dw = scratch<T>(2, static_cast<std::size_t>(g.cout * K));
      for (std::int64_t s = 0; s < n; ++s) {
        im2col(g, xn->data.data() + s * g.cin * g.h * g.w, col.data());
        kernels::transpose<T>(K, P, col.data(), colt.data());
        kernels::gemm<T>(g.cout, K, P, gd + s * g.cout * P, P, colt.data(), K, dw.data(), K);
        for (std::int64_t i = 0; i < g.cout * K; ++i) kn->grad[i] += dw[i];
      }
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      std::vector<T> wtrans(static_cast<std::size_t>(K * g.cout));
      kernels::transpose<T>(g.cout, K, kn->data.data(), wtrans.data());
      auto& dcol = scratch<T>(0, static_cast<std::size_t>(K * P));
      for (std::int64_t s = 0; s < n; ++s) {
        kernels::gemm<T>(K, P, g.cout, wtrans.data(), g.cout, gd + s * g.cout * P, P, dcol.data(), P);
        col2im_add(g, dcol.data(), xn->grad.data() + s * g.cin * g.h * g.w);
      }
    }
  });
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const LinearWeights<T>& w) {
  check(x.rank() == 2, "linear: input must be [N, in_dim]");
  const std::int64_t n = x.dim(0), in = x.dim(1), out_dim = w.out_dim();
  check(in == w.in_dim(), "linear: input dim " + std::to_string(in) + " but weight expects " +
                              std::to_string(w.in_dim()));
  const bool has_bias = w.bias.defined();
  std::vector<T> wt(static_cast<std::size_t>(in * out_dim));
  kernels::transpose<T>(out_dim, in, w.weight.data().data(), wt.data());
  std::vector<T> out(static_cast<std::size_t>(n * out_dim));
  kernels::gemm<T>(n, out_dim, in, x.data().data(), in, wt.data(), out_dim, out.data(), out_dim);
  if (has_bias) {
    const auto bd = w.bias.data();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t o = 0; o < out_dim; ++o) out[i * out_dim + o] += bd[o];
  }
  auto xn = x.node();
  auto wn = w.weight.node();
  detail::NodePtr<T> bn = has_bias ? w.bias.node() : nullptr;
  std::vector<BasicTensor<T>> inputs{x, w.weight};
  if (has_bias) inputs.push_back(w.bias);
  return make_result<T>({n, out_dim}, std::move(out), inputs, [n, in, out_dim, xn, wn, bn](detail::Node<T>& self) {
    const T* g = self.grad.data();
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t o = 0; o < out_dim; ++o) bn->grad[o] += g[i * out_dim + o];
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      std::vector<T> gt(static_cast<std::size_t>(n * out_dim));
      kernels::transpose<T>(n, out_dim, g, gt.data());
      std::vector<T> dw(static_cast<std::size_t>(out_dim * in));
      kernels::gemm<T>(out_dim, in, n, gt.data(), n, xn->data.data(), in, dw.data(), in);
      for (std::size_t i = 0; i < dw.size(); ++i) wn->grad[i] += dw[i];
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      std::vector<T> dx(static_cast<std::size_t>(n * in));
      kernels::gemm<T>(n, in, out_dim, g, out_dim, wn->data.data(), in, dx.data(), in);
      for (std::size_t i = 0; i < dx.size(); ++i) xn->grad[i] += dx[i];
    }
  });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  auto xn = x.node();
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn](detail::Node<T>& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (xn->data[i] > T(0)) xn->grad[i] += self.grad[i];
  });
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
  check(x.rank() == 4, "global_avg_pool: input must be [N,C,H,W]");
  const std::int64_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<T> out(static_cast<std::size_t>(nc));
  const auto d = x.data();
  for (std::int64_t i = 0; i < nc; ++i) {
    T acc = 0;
    for (std::int64_t p = 0; p < hw; ++p) acc += d[i * hw + p];
    out[i] = acc / static_cast<T>(hw);
  }
  auto xn = x.node();
  return make_result<T>({x.dim(0), x.dim(1)}, std::move(out), {&x}, [xn, nc, hw](detail::Node<T>& self) {
    xn->ensure_grad();
    const T inv = T(1) / static_cast<T>(hw);
    for (std::int64_t i = 0; i < nc; ++i) {
      const T g = self.grad[i] * inv;
      for (std::int64_t p = 0; p < hw; ++p) xn->grad[i * hw + p] += g;
    }
  });
}

template <typename T>
BasicTensor<T> channel_std(const BasicTensor<T>& x) {
  check(x.rank() == 4, "channel_std: input must be [N,C,H,W]");
  const std::int64_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<T> out(static_cast<std::size_t>(nc));
  std::vector<T> mean(static_cast<std::size_t>(nc));
  const auto d = x.data();
  for (std::int64_t i = 0; i < nc; ++i) {
    T acc = 0;
    for (std::int64_t p = 0; p < hw; ++p) acc += d[i * hw + p];
    const T mu = acc / static_cast<T>(hw);
    T var = 0;
    for (std::int64_t p = 0; p < hw; ++p) {
      const T c = d[i * hw + p] - mu;
      var += c * c;
    }
    var /= static_cast<T>(hw);
    mean[i] = mu;
    out[i] = std::sqrt(var + static_cast<T>(kStdEpsilon));
  }
  auto xn = x.node();
  return make_result<T>({x.dim(0), x.dim(1)}, std::move(out), {&x},
                        [xn, nc, hw, mean = std::move(mean)](detail::Node<T>& self) {
                          xn->ensure_grad();
                          for (std::int64_t i = 0; i < nc; ++i) {
                            const T g = self.grad[i] / (static_cast<T>(hw) * self.data[i]);
                            for (std::int64_t p = 0; p < hw; ++p)
                              xn->grad[i * hw + p] += g * (xn->data[i * hw + p] - mean[i]);
                          }
                        });
}

template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& xs) {
  check(!xs.empty(), "concat_channels: no inputs");
  for (const auto& x : xs) {
    check(x.rank() == 4, "concat_channels: inputs must be [N,C,H,W]");
    check(x.dim(0) == xs[0].dim(0) && x.dim(2) == xs[0].dim(2) && x.dim(3) == xs[0].dim(3),
          "concat_channels: spatial/batch mismatch " + shape_str(x.shape()) + " vs " +
              shape_str(xs[0].shape()));
  }
  if (xs.size() == 1) return xs[0];
  return concat(xs, 1);
}

// ---------------------------------------------------------------------------
// Resampling

double cubic_kernel(double x, double a) {
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

ResampleTable ResampleTable::build(Filter filter, std::int64_t in, std::int64_t out) {
  check(in > 0 && out > 0, "resample: extents must be positive");
  ResampleTable t;
  t.in = in;
  t.out = out;
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const double radius = filter == Filter::bilinear ? 1.0 : 2.0;
  const double shrink = std::min(scale, 1.0);
  const double support = radius / shrink;
  t.begin.push_back(0);
  for (std::int64_t i = 0; i < out; ++i) {
    const double src = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const auto lo = static_cast<std::int64_t>(std::floor(src - support)) + 1;
    const auto hi = static_cast<std::int64_t>(std::ceil(src + support)) - 1;
    std::map<std::int64_t, double> taps;
    double total = 0.0;
    for (std::int64_t j = lo; j <= hi; ++j) {
      const double x = (src - static_cast<double>(j)) * shrink;
      const double w = filter == Filter::bilinear ? std::max(0.0, 1.0 - std::abs(x)) : cubic_kernel(x);
      if (w == 0.0) continue;
      taps[std::clamp<std::int64_t>(j, 0, in - 1)] += w;
      total += w;
    }
    std::int64_t best = -1;
    double best_w = -1e300;
    for (auto [j, w] : taps) {
      w /= total;
      if (w == 0.0) continue;
      if (w > best_w) {
        best_w = w;
        best = static_cast<std::int64_t>(t.idx.size());
      }
      t.idx.push_back(j);
      t.weight.push_back(w);
    }
    t.anchor.push_back(best);
    t.begin.push_back(static_cast<std::int64_t>(t.idx.size()));
  }
  return t;
}

namespace {

// One separable pass along `axis` of an [outer, extent, inner] view.
// Written as x[anchor] + sum w * (x[j] - x[anchor]) so constants are exact.
template <typename T>
BasicTensor<T> resample_axis(const BasicTensor<T>& x, std::size_t axis, const ResampleTable& table) {
  check(x.dim(axis) == table.in, "resample: table/input extent mismatch");
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  Shape out_shape = x.shape();
  out_shape[axis] = table.out;
  std::vector<T> out(static_cast<std::size_t>(outer * table.out * inner));
  const T* d = x.data().data();
  for (std::int64_t o = 0; o < outer; ++o) {
    const T* src = d + o * table.in * inner;
    T* dst = out.data() + o * table.out * inner;
    for (std::int64_t i = 0; i < table.out; ++i) {
      const auto a = table.anchor[i];
      const T* xa = src + table.idx[a] * inner;
      T* row = dst + i * inner;
      std::copy_n(xa, inner, row);
      for (auto t = table.begin[i]; t < table.begin[i + 1]; ++t) {
        if (t == a) continue;
        const T w = static_cast<T>(table.weight[t]);
        const T* xj = src + table.idx[t] * inner;
        for (std::int64_t q = 0; q < inner; ++q) row[q] += w * (xj[q] - xa[q]);
      }
    }
  }
  auto xn = x.node();
  return make_result<T>(std::move(out_shape), std::move(out), {&x}, [xn, table, outer, inner](detail::Node<T>& self) {
    xn->ensure_grad();
    for (std::int64_t o = 0; o < outer; ++o) {
      T* gsrc = xn->grad.data() + o * table.in * inner;
      const T* g = self.grad.data() + o * table.out * inner;
      for (std::int64_t i = 0; i < table.out; ++i) {
        const auto a = table.anchor[i];
        const T* gi = g + i * inner;
        T rest = 0;
        for (auto t = table.begin[i]; t < table.begin[i + 1]; ++t) {
          if (t == a) continue;
          const T w = static_cast<T>(table.weight[t]);
          rest += w;
          T* gj = gsrc + table.idx[t] * inner;
          for (std::int64_t q = 0; q < inner; ++q) gj[q] += w * gi[q];
        }
        T* ga = gsrc + table.idx[a] * inner;
        const T wa = T(1) - rest;
        for (std::int64_t q = 0; q < inner; ++q) ga[q] += wa * gi[q];
      }
    }
  });
}

}  // namespace

template <typename T>
BasicTensor<T> resample(const BasicTensor<T>& x, Filter filter, std::int64_t out_h, std::int64_t out_w) {
  check(x.rank() == 4, "resample: input must be [N,C,H,W]");
  BasicTensor<T> y = x;
  if (out_w != x.dim(3)) y = resample_axis(y, 3, ResampleTable::build(filter, x.dim(3), out_w));
  if (out_h != x.dim(2)) y = resample_axis(y, 2, ResampleTable::build(filter, x.dim(2), out_h));
  return y;
}

template <typename T>
BasicTensor<T> upsample_bilinear2x(const BasicTensor<T>& x) {
  check(x.rank() == 4, "upsample_bilinear2x: input must be [N,C,H,W]");
  return resample(x, Filter::bilinear, 2 * x.dim(2), 2 * x.dim(3));
}

namespace {
std::int64_t scaled_extent(std::int64_t e, double factor) {
  const double s = static_cast<double>(e) * factor;
  const auto r = static_cast<std::int64_t>(std::llround(s));
  check(r >= 1 && std::abs(s - static_cast<double>(r)) < 1e-9,
        "resize_bicubic: extent " + std::to_string(e) + " not divisible for factor " + std::to_string(factor));
  return r;
}
}  // namespace

template <typename T>
BasicTensor<T> resize_bicubic(const BasicTensor<T>& x, double factor) {
  check(x.rank() == 4, "resize_bicubic: input must be [N,C,H,W]");
  check(factor > 0 && std::exp2(std::round(std::log2(factor))) == factor,
        "resize_bicubic: factor must be a power of two");
  const auto oh = scaled_extent(x.dim(2), factor);
  const auto ow = scaled_extent(x.dim(3), factor);
  if (oh == x.dim(2) && ow == x.dim(3)) return x;
  return resample(x, Filter::bicubic, oh, ow);
}

// ---------------------------------------------------------------------------

std::pair<double, double> fan_in_out(const Shape& shape) {
  check(!shape.empty(), "xavier: empty shape");
  if (shape.size() == 1) return {static_cast<double>(shape[0]), static_cast<double>(shape[0])};
  double receptive = 1.0;
  for (std::size_t i = 2; i < shape.size(); ++i) receptive *= static_cast<double>(shape[i]);
  return {static_cast<double>(shape[1]) * receptive, static_cast<double>(shape[0]) * receptive};
}

template <typename T>
BasicTensor<T> xavier_uniform(const Shape& shape, Rng& rng) {
  const auto [fi, fo] = fan_in_out(shape);
  const double bound = std::sqrt(6.0 / (fi + fo));
  std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& e : v) e = static_cast<T>(rng.uniform(-bound, bound));
  return BasicTensor<T>(shape, std::move(v), true);
}

template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, const std::vector<std::vector<T>>& grads,
               AdamState<T>& state) {
  check(grads.size() == params.size(), "adam_step: gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), T(0));
      state.v.emplace_back(p.numel(), T(0));
    }
  }
  check(state.m.size() == params.size(), "adam_step: state holds " + std::to_string(state.m.size()) +
                                             " buffers for " + std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    check(state.m[i].size() == params[i].numel() && state.v[i].size() == params[i].numel(),
          "adam_step: moment buffer shape mismatch");
    check(grads[i].empty() || grads[i].size() == params[i].numel(), "adam_step: gradient shape mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T lr = static_cast<T>(state.lr), eps = static_cast<T>(state.eps);
  const T inv_bc1 = static_cast<T>(1.0 / bc1), inv_bc2 = static_cast<T>(1.0 / bc2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const T gj = g.empty() ? T(0) : g[j];
      m[j] = b1 * m[j] + (T(1) - b1) * gj;
      v[j] = b2 * v[j] + (T(1) - b2) * gj * gj;
      const T mhat = m[j] * inv_bc1;
      const T vhat = v[j] * inv_bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, AdamState<T>& state) {
  std::vector<std::vector<T>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p.grad().begin(), p.grad().end());
  adam_step(params, grads, state);
}

#define IAN_INSTANTIATE(T)                                                                                   \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, int, int); \
  template BasicTensor<T> linear(const BasicTensor<T>&, const LinearWeights<T>&);                          \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                     \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                          \
  template BasicTensor<T> channel_std(const BasicTensor<T>&);                                              \
  template BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>&);                             \
  template BasicTensor<T> resample(const BasicTensor<T>&, Filter, std::int64_t, std::int64_t);             \
  template BasicTensor<T> upsample_bilinear2x(const BasicTensor<T>&);                                      \
  template BasicTensor<T> resize_bicubic(const BasicTensor<T>&, double);                                   \
  template BasicTensor<T> xavier_uniform(const Shape&, Rng&);                                              \
  template void adam_step(std::vector<BasicTensor<T>>&, AdamState<T>&);                                    \
  template void adam_step(std::vector<BasicTensor<T>>&, const std::vector<std::vector<T>>&, AdamState<T>&);

IAN_INSTANTIATE(float)
IAN_INSTANTIATE(double)

}  // namespace ian
