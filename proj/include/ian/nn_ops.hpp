#pragma once

// Layer primitives: convolution, linear projection, activations, channel
// statistics, resampling, initialisation and the Adam update.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ian/random.hpp"
#include "ian/tensor.hpp"

namespace ian {

/// 3x3 (odd k) convolution weights. Bias may be left undefined.
template <typename T>
struct ConvWeights {
  BasicTensor<T> kernel;  // [out_ch, in_ch, k, k]
  BasicTensor<T> bias;    // [out_ch]
  int stride = 1;
  int dilation = 1;

  std::int64_t out_channels() const { return kernel.dim(0); }
  std::int64_t in_channels() const { return kernel.dim(1); }
  std::int64_t kernel_size() const { return kernel.dim(2); }
};

template <typename T>
struct LinearWeights {
  BasicTensor<T> weight;  // [out_dim, in_dim]
  BasicTensor<T> bias;    // [out_dim]

  std::int64_t in_dim() const { return weight.dim(1); }
  std::int64_t out_dim() const { return weight.dim(0); }
};

template <typename T>
using NamedParams = std::vector<std::pair<std::string, BasicTensor<T>>>;

template <typename T>
void append_params(const ConvWeights<T>& w, const std::string& prefix, NamedParams<T>& out) {
  out.emplace_back(prefix + ".weight", w.kernel);
  if (w.bias.defined()) out.emplace_back(prefix + ".bias", w.bias);
}

template <typename T>
void append_params(const LinearWeights<T>& w, const std::string& prefix, NamedParams<T>& out) {
  out.emplace_back(prefix + ".weight", w.weight);
  if (w.bias.defined()) out.emplace_back(prefix + ".bias", w.bias);
}

/// Cross-correlation with zero "same" padding of dilation*(k-1)/2, so the
/// output is ceil(H/stride) x ceil(W/stride).
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernel, const BasicTensor<T>& bias,
                      int stride, int dilation);
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const ConvWeights<T>& w) {
  return conv2d(x, w.kernel, w.bias, w.stride, w.dilation);
}

/// x[N, in] -> x * weight^T + bias.
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const LinearWeights<T>& w);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

/// [N,C,H,W] -> [N,C] spatial mean.
template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

inline constexpr double kStdEpsilon = 1e-12;

/// [N,C,H,W] -> [N,C] population standard deviation sqrt(var + 1e-12).
template <typename T>
BasicTensor<T> channel_std(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& xs);

// ---------------------------------------------------------------------------
// Resampling. Both filters sample at pixel centres, clamp sample coordinates
// at the border and reproduce constant images exactly.

enum class Filter { bilinear, bicubic };

/// Sparse 1-D resampling table from `in` to `out` samples.
struct ResampleTable {
  std::int64_t in = 0;
  std::int64_t out = 0;
  std::vector<std::int64_t> begin;  // out + 1 offsets into idx/weight
  std::vector<std::int64_t> idx;
  std::vector<double> weight;
  std::vector<std::int64_t> anchor;  // per output: position (in idx) of the dominant tap

  /// Downscaling widens the kernel by in/out (antialiasing); upscaling
  /// interpolates directly. Bicubic uses a = -0.5.
  static ResampleTable build(Filter filter, std::int64_t in, std::int64_t out);
};

double cubic_kernel(double x, double a = -0.5);

template <typename T>
BasicTensor<T> resample(const BasicTensor<T>& x, Filter filter, std::int64_t out_h, std::int64_t out_w);

template <typename T>
BasicTensor<T> upsample_bilinear2x(const BasicTensor<T>& x);

/// factor must be a power of two (e.g. 1/4, 1/2, 1, 2) and the result
/// extents exact integers.
template <typename T>
BasicTensor<T> resize_bicubic(const BasicTensor<T>& x, double factor);

// ---------------------------------------------------------------------------
// Initialisation and optimisation

/// Uniform in +-sqrt(6/(fan_in+fan_out)). For rank-4 kernels the fans
/// include the receptive field.
template <typename T>
BasicTensor<T> xavier_uniform(const Shape& shape, Rng& rng);
template <typename T>
BasicTensor<T> xavier_init(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  return xavier_uniform<T>(shape, rng);
}
std::pair<double, double> fan_in_out(const Shape& shape);

/// Xavier kernel, zero bias.
template <typename T>
ConvWeights<T> make_conv(std::int64_t in_ch, std::int64_t out_ch, Rng& rng, int stride = 1, int dilation = 1,
                         std::int64_t k = 3) {
  ConvWeights<T> w;
  w.kernel = xavier_uniform<T>({out_ch, in_ch, k, k}, rng);
  w.bias = BasicTensor<T>::zeros({out_ch}, true);
  w.stride = stride;
  w.dilation = dilation;
  return w;
}

template <typename T>
LinearWeights<T> make_linear(std::int64_t in_dim, std::int64_t out_dim, Rng& rng) {
  LinearWeights<T> w;
  w.weight = xavier_uniform<T>({out_dim, in_dim}, rng);
  w.bias = BasicTensor<T>::zeros({out_dim}, true);
  return w;
}

template <typename T>
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

/// Bias-corrected Adam update using each parameter's accumulated gradient
/// (absent gradient counts as zero). Moments are created on first use.
template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, AdamState<T>& state);

/// Same, with explicitly supplied gradients.
template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, const std::vector<std::vector<T>>& grads,
               AdamState<T>& state);

}  // namespace ian
