#include "ian/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ian/nn_ops.hpp"

namespace ian {

void LossWeights::validate() const {
  check(alpha >= 0 && beta >= 0 && gamma >= 0, "loss weights must be non-negative");
  for (double m : level) check(m >= 0, "level loss weights must be non-negative");
}

namespace {
template <typename T>
void check_pair(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
  check(a.shape() == b.shape(),
        std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Treat every channel as its own single-channel image.
template <typename T>
BasicTensor<T> as_planes(const BasicTensor<T>& x) {
  return reshape(x, {x.dim(0) * x.dim(1), 1, x.dim(2), x.dim(3)});
}

template <typename T>
BasicTensor<T> blur_valid(const BasicTensor<T>& x, const BasicTensor<T>& window) {
  const auto r = window.dim(2) / 2;
  auto y = conv2d(x, window, BasicTensor<T>(), 1, 1);
  y = narrow(y, 2, r, x.dim(2) - 2 * r);
  return narrow(y, 3, r, x.dim(3) - 2 * r);
}
}  // namespace

template <typename T>
BasicTensor<T> l1_loss(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_pair(a, b, "l1_loss");
  return mean_all(abs(sub(a, b)));
}

template <typename T>
BasicTensor<T> to_grayscale(const BasicTensor<T>& img) {
  check(img.rank() == 4 && img.dim(1) == 3, "to_grayscale: expected [N,3,H,W], got " + shape_str(img.shape()));
  const auto lum = BasicTensor<T>({1, 3, 1, 1}, {T(0.299), T(0.587), T(0.114)});
  return reshape(reduce(ReduceOp::sum, mul(img, lum), {1}), {img.dim(0), 1, img.dim(2), img.dim(3)});
}

template <typename T>
BasicTensor<T> gaussian_window(int k) {
  check(k >= 1 && k % 2 == 1, "gaussian_window: size must be odd and positive");
  const int r = k / 2;
  std::vector<double> g(k);
  double s = 0;
  for (int i = 0; i < k; ++i) {
    g[i] = std::exp(-double((i - r) * (i - r)) / (2 * kSsimSigma * kSsimSigma));
    s += g[i];
  }
  std::vector<T> w(static_cast<std::size_t>(k * k));
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) w[y * k + x] = static_cast<T>(g[y] * g[x] / (s * s));
  return BasicTensor<T>({1, 1, k, k}, std::move(w));
}

template <typename T>
BasicTensor<T> ssim(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_pair(a, b, "ssim");
  check(a.rank() == 4, "ssim: expected [N,C,H,W]");
  check(a.dim(2) >= 3 && a.dim(3) >= 3, "ssim: image " + shape_str(a.shape()) + " smaller than 3x3");
  // Images narrower than the window use the largest odd window that fits.
  auto k = std::min<std::int64_t>({kSsimWindow, a.dim(2), a.dim(3)});
  if (k % 2 == 0) --k;
  const auto win = gaussian_window<T>(static_cast<int>(k));
  const auto x = as_planes(a), y = as_planes(b);
  const auto mx = blur_valid(x, win), my = blur_valid(y, win);
  const auto mxx = mul(mx, mx), myy = mul(my, my), mxy = mul(mx, my);
  const auto sxx = sub(blur_valid(mul(x, x), win), mxx);
  const auto syy = sub(blur_valid(mul(y, y), win), myy);
  const auto sxy = sub(blur_valid(mul(x, y), win), mxy);
  const auto num = mul(add_scalar(mul_scalar(mxy, T(2)), T(kSsimC1)), add_scalar(mul_scalar(sxy, T(2)), T(kSsimC2)));
  const auto den = mul(add_scalar(add(mxx, myy), T(kSsimC1)), add_scalar(add(sxx, syy), T(kSsimC2)));
  return mean_all(div(num, den));
}

template <typename T>
BasicTensor<T> ssim_gray_loss(const BasicTensor<T>& out, const BasicTensor<T>& gt) {
  return add_scalar(mul_scalar(ssim(to_grayscale(out), to_grayscale(gt)), T(-1)), T(1));
}

template <typename T>
BasicTensor<T> gradient_loss(const BasicTensor<T>& out, const BasicTensor<T>& gt) {
  check_pair(out, gt, "gradient_loss");
  check(out.rank() == 4 && out.dim(2) >= 3 && out.dim(3) >= 3, "gradient_loss: need H,W >= 3");
  const auto h = out.dim(2) - 2, w = out.dim(3) - 2;
  const auto d = sub(out, gt);
  const auto rows = narrow(d, 2, 1, h), cols = narrow(d, 3, 1, w);
  const auto dx = sub(narrow(rows, 3, 2, w), narrow(rows, 3, 0, w));
  const auto dy = sub(narrow(cols, 2, 2, h), narrow(cols, 2, 0, h));
  return add(mean_all(square(dx)), mean_all(square(dy)));
}

template <typename T>
BasicTensor<T> total_loss(const std::vector<BasicTensor<T>>& outputs, const std::vector<BasicTensor<T>>& gts,
                          const LossWeights& w) {
  check(outputs.size() == gts.size() && !outputs.empty(),
        "total_loss: " + std::to_string(outputs.size()) + " outputs vs " + std::to_string(gts.size()) + " targets");
  check(w.level.size() >= outputs.size(), "total_loss: fewer level weights than pyramid levels");
  BasicTensor<T> total;
  auto acc = [&](const BasicTensor<T>& term, double weight) {
    const auto t = mul_scalar(term, static_cast<T>(weight));
    total = total.defined() ? add(total, t) : t;
  };
  for (std::size_t l = 0; l < outputs.size(); ++l) {
    const double mu = w.level[l];
    if (mu == 0) continue;
    if (w.alpha != 0) acc(l1_loss(outputs[l], gts[l]), mu * w.alpha);
    if (w.beta != 0) acc(ssim_gray_loss(outputs[l], gts[l]), mu * w.beta);
    if (w.gamma != 0) acc(gradient_loss(outputs[l], gts[l]), mu * w.gamma);
  }
  if (!total.defined()) total = BasicTensor<T>::scalar(T(0));
  return total;
}

// ---------------------------------------------------------------------------

template <typename T>
double psnr(const BasicTensor<T>& out, const BasicTensor<T>& gt) {
  check_pair(out, gt, "psnr");
  const auto a = out.data(), b = gt.data();
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    se += d * d;
  }
  const double mse = se / double(a.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

template <typename T>
double ssim_rgb(const BasicTensor<T>& out, const BasicTensor<T>& gt) {
  NoGradGuard ng;
  return ssim(out.template cast<double>(), gt.template cast<double>()).item();
}

template <typename T>
double ssim_luma(const BasicTensor<T>& out, const BasicTensor<T>& gt) {
  NoGradGuard ng;
  return ssim(to_grayscale(out.template cast<double>()), to_grayscale(gt.template cast<double>())).item();
}

template <typename T>
BasicTensor<T> clamp01(const BasicTensor<T>& x) {
  std::vector<T> v(x.data().begin(), x.data().end());
  for (auto& e : v) e = std::clamp(e, T(0), T(1));
  return BasicTensor<T>(x.shape(), std::move(v));
}

#define IAN_INSTANTIATE(T)                                                                                    \
  template BasicTensor<T> l1_loss(const BasicTensor<T>&, const BasicTensor<T>&);                              \
  template BasicTensor<T> to_grayscale(const BasicTensor<T>&);                                                \
  template BasicTensor<T> gaussian_window<T>(int);                                                               \
  template BasicTensor<T> ssim(const BasicTensor<T>&, const BasicTensor<T>&);                                 \
  template BasicTensor<T> ssim_gray_loss(const BasicTensor<T>&, const BasicTensor<T>&);                       \
  template BasicTensor<T> gradient_loss(const BasicTensor<T>&, const BasicTensor<T>&);                        \
  template BasicTensor<T> total_loss(const std::vector<BasicTensor<T>>&, const std::vector<BasicTensor<T>>&,  \
                                     const LossWeights&);                                                     \
  template double psnr(const BasicTensor<T>&, const BasicTensor<T>&);                                         \
  template double ssim_rgb(const BasicTensor<T>&, const BasicTensor<T>&);                                     \
  template double ssim_luma(const BasicTensor<T>&, const BasicTensor<T>&);                                    \
  template BasicTensor<T> clamp01(const BasicTensor<T>&);

IAN_INSTANTIATE(float)
IAN_INSTANTIATE(double)

}  // namespace ian
