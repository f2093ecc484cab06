#pragma once

// Training objectives and image quality metrics. Images are [N,C,H,W] with
// unit dynamic range.

#include <vector>

#include "ian/tensor.hpp"

namespace ian {

struct LossWeights {
  double alpha = 1.0;  // L1
  double beta = 0.5;   // grayscale SSIM
  double gamma = 0.0;  // gradient
  std::vector<double> level = {1.0, 1.0, 1.0, 1.0};  // mu per pyramid level, finest first

  static LossWeights ssim_preset() { return {}; }
  static LossWeights gradient_preset() { return {1.0, 0.0, 0.5, {1.0, 1.0, 1.0, 1.0}}; }
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

template <typename T>
BasicTensor<T> l1_loss(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
template <typename T>
BasicTensor<T> to_grayscale(const BasicTensor<T>& img);

/// Normalised k x k Gaussian (sigma 1.5) as a [1,1,k,k] kernel.
template <typename T>
BasicTensor<T> gaussian_window(int k = kSsimWindow);

/// Mean of the local SSIM map over "valid" window positions. Each channel
/// is treated as an independent image; the result is a single element.
/// Below 11 px the window shrinks to the largest odd size that fits.
template <typename T>
BasicTensor<T> ssim(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// 1 - ssim(gray(out), gray(gt)).
template <typename T>
BasicTensor<T> ssim_gray_loss(const BasicTensor<T>& out, const BasicTensor<T>& gt);

/// Mean over interior pixels and channels of the squared difference of
/// central-difference gradients (I(x+1) - I(x-1), unscaled).
template <typename T>
BasicTensor<T> gradient_loss(const BasicTensor<T>& out, const BasicTensor<T>& gt);

/// sum_l mu_l (alpha L1 + beta L_ssim + gamma L_grad); terms with zero
/// weight are skipped.
template <typename T>
BasicTensor<T> total_loss(const std::vector<BasicTensor<T>>& outputs, const std::vector<BasicTensor<T>>& gts,
                          const LossWeights& w);

// ---------------------------------------------------------------------------
// Metrics (no gradient, double precision)

/// 10 log10(1/MSE) over all elements; +infinity for identical inputs.
template <typename T>
double psnr(const BasicTensor<T>& out, const BasicTensor<T>& gt);

/// SSIM averaged over RGB channels.
template <typename T>
double ssim_rgb(const BasicTensor<T>& out, const BasicTensor<T>& gt);

/// SSIM of the BT.601 luma.
template <typename T>
double ssim_luma(const BasicTensor<T>& out, const BasicTensor<T>& gt);

template <typename T>
BasicTensor<T> clamp01(const BasicTensor<T>& x);

}  // namespace ian
