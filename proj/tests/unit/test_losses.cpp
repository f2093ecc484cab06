#include <cmath>
#include <limits>

#include "doctest.h"
#include "ian/losses.hpp"
#include "ian/random.hpp"

using namespace ian;

namespace {

Tensor64 rand64(const Shape& s, Rng& rng, double lo = 0, double hi = 1, bool grad = false) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
  for (auto& e : v) e = rng.uniform(lo, hi);
  return Tensor64(s, v, grad);
}

// Windowed SSIM written directly from its definition (valid positions only).
double ssim_oracle(const Tensor64& a, const Tensor64& b, int k = kSsimWindow) {
  const int r = k / 2;
  std::vector<double> g(k);
  double gs = 0;
  for (int i = 0; i < k; ++i) gs += g[i] = std::exp(-double((i - r) * (i - r)) / (2 * kSsimSigma * kSsimSigma));
  const auto planes = a.dim(0) * a.dim(1), h = a.dim(2), w = a.dim(3);
  double total = 0;
  std::int64_t count = 0;
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t y = r; y < h - r; ++y)
      for (std::int64_t x = r; x < w - r; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const double wt = g[dy + r] * g[dx + r] / (gs * gs);
            const double va = a.data()[(p * h + y + dy) * w + x + dx], vb = b.data()[(p * h + y + dy) * w + x + dx];
            ma += wt * va;
            mb += wt * vb;
            saa += wt * va * va;
            sbb += wt * vb * vb;
            sab += wt * va * vb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cab = sab - ma * mb;
        total += (2 * ma * mb + kSsimC1) * (2 * cab + kSsimC2) / ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
        ++count;
      }
  return total / double(count);
}

}  // namespace

TEST_CASE("l1 loss values") {
  const auto z = Tensor64::zeros({1, 3, 4, 4});
  CHECK(l1_loss(z, z).item() == 0);
  CHECK(l1_loss(z, Tensor64::full({1, 3, 4, 4}, 0.5)).item() == 0.5);
  CHECK_THROWS_AS(l1_loss(z, Tensor64::zeros({1, 3, 4, 5})), Error);
}

TEST_CASE("grayscale conversion") {
  const Tensor64 red({1, 3, 1, 1}, {1, 0, 0});
  CHECK(to_grayscale(red).item() == doctest::Approx(0.299).epsilon(1e-15));
  const auto gray = to_grayscale(Tensor64::full({2, 3, 2, 2}, 0.4));
  CHECK(gray.shape() == Shape{2, 1, 2, 2});
  for (double v : gray.data()) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(to_grayscale(Tensor64::zeros({1, 3, 1, 1})).item() == 0);
  CHECK_THROWS_AS(to_grayscale(Tensor64::zeros({1, 2, 3, 3})), Error);
}

TEST_CASE("ssim against a direct windowed evaluation") {
  Rng rng(1);
  for (int k = 0; k < 3; ++k) {
    const auto a = rand64({2, 1, 16, 14}, rng);
    auto b = rand64({2, 1, 16, 14}, rng);
    if (k == 1) b = add(mul_scalar(a, 0.8), Tensor64::scalar(0.05));
    CHECK(ssim(a, b).item() == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("ssim identities and bounds") {
  Rng rng(2);
  const auto a = rand64({1, 3, 20, 20}, rng), b = rand64({1, 3, 20, 20}, rng);
  CHECK(std::abs(ssim(a, a).item() - 1) < 1e-9);
  CHECK(std::abs(ssim(a, b).item() - ssim(b, a).item()) < 1e-9);
  CHECK(ssim(a, b).item() < 1);
  const double c = ssim(Tensor64::full({1, 1, 12, 12}, 0.2), Tensor64::full({1, 1, 12, 12}, 0.8)).item();
  CHECK(std::abs(c - (2 * 0.2 * 0.8 + kSsimC1) / (0.04 + 0.64 + kSsimC1)) < 1e-3);
  CHECK(ssim_gray_loss(a, a).item() == doctest::Approx(0).scale(1).epsilon(1e-12));
  const double l = ssim_gray_loss(a, b).item();
  CHECK(l >= 0);
  CHECK(l <= 2);
  CHECK_THROWS_AS(ssim(Tensor64::zeros({1, 1, 2, 12}), Tensor64::zeros({1, 1, 2, 12})), Error);
}

TEST_CASE("ssim on images narrower than the window") {
  Rng rng(12);
  const auto a = rand64({2, 1, 10, 12}, rng), b = rand64({2, 1, 10, 12}, rng);
  CHECK(std::abs(ssim(a, b).item() - ssim_oracle(a, b, 9)) < 1e-12);
  const auto c = rand64({1, 3, 8, 8}, rng), d = rand64({1, 3, 8, 8}, rng);
  CHECK(std::abs(ssim(c, d).item() - ssim_oracle(c, d, 7)) < 1e-12);
  CHECK(std::abs(ssim(c, c).item() - 1) < 1e-12);
}

TEST_CASE("gradient loss") {
  std::vector<double> ramp(6 * 7);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 7; ++x) ramp[y * 7 + x] = x;
  const Tensor64 r({1, 1, 6, 7}, ramp);
  CHECK(gradient_loss(r, Tensor64::full({1, 1, 6, 7}, 0.3)).item() == doctest::Approx(4.0).epsilon(1e-15));
  Rng rng(3);
  const auto a = rand64({1, 3, 8, 8}, rng), b = rand64({1, 3, 8, 8}, rng);
  CHECK(gradient_loss(a, a).item() == 0);
  CHECK(gradient_loss(add_scalar(a, 0.25), b).item() == doctest::Approx(gradient_loss(a, b).item()).epsilon(1e-12));
  CHECK_THROWS_AS(gradient_loss(Tensor64::zeros({1, 1, 2, 5}), Tensor64::zeros({1, 1, 2, 5})), Error);
}

TEST_CASE("loss gradients match central differences at 12x12") {
  Rng rng(4);
  const auto gt = rand64({1, 3, 12, 12}, rng);
  auto out = rand64({1, 3, 12, 12}, rng, 0, 1, true);
  // Push |out - gt| away from the L1 kink.
  for (std::size_t i = 0; i < out.numel(); ++i) {
    auto& v = out.mutable_data()[i];
    if (std::abs(v - gt.data()[i]) < 0.05) v = gt.data()[i] + 0.05;
  }
  for (int which = 0; which < 3; ++which) {
    auto f = [&](const Tensor64& o) {
      return which == 0 ? l1_loss(o, gt) : which == 1 ? ssim_gray_loss(o, gt) : gradient_loss(o, gt);
    };
    out.zero_grad();
    f(out).backward();
    const auto num = finite_diff_grad([&](const Tensor64& p) { return f(p).item(); }, out, 1e-4);
    double worst = 0, scale = 0;
    for (double v : num.data()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < out.numel(); ++i)
      worst = std::max(worst, std::abs(out.grad()[i] - num.data()[i]) / std::max(std::abs(num.data()[i]), 1e-3 * scale));
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("total loss composition") {
  Rng rng(5);
  std::vector<Tensor64> outs, gts;
  for (int l = 0; l < 3; ++l) {
    outs.push_back(rand64({1, 3, 48 >> l, 48 >> l}, rng));
    gts.push_back(rand64({1, 3, 48 >> l, 48 >> l}, rng));
  }
  CHECK(total_loss(gts, gts, LossWeights{}).item() == doctest::Approx(0).scale(1).epsilon(1e-12));
  LossWeights l1only{1, 0, 0, {1, 1, 1, 1}};
  double ref = 0;
  for (int l = 0; l < 3; ++l) ref += l1_loss(outs[l], gts[l]).item();
  CHECK(total_loss(outs, gts, l1only).item() == doctest::Approx(ref).epsilon(1e-14));
  // With beta = 0 no SSIM term is formed.
  LossWeights w{0.7, 0, 0.3, {1, 0.5, 2, 1}};
  ref = 0;
  for (int l = 0; l < 3; ++l)
    ref += w.level[l] * (0.7 * l1_loss(outs[l], gts[l]).item() + 0.3 * gradient_loss(outs[l], gts[l]).item());
  CHECK(total_loss(outs, gts, w).item() == doctest::Approx(ref).epsilon(1e-14));
  CHECK_THROWS_AS(total_loss(outs, std::vector<Tensor64>(gts.begin(), gts.begin() + 2), w), Error);
  const auto ssim_p = LossWeights::ssim_preset(), grad_p = LossWeights::gradient_preset();
  CHECK((ssim_p.alpha == 1.0 && ssim_p.beta == 0.5 && ssim_p.gamma == 0.0));
  CHECK((grad_p.alpha == 1.0 && grad_p.beta == 0.0 && grad_p.gamma == 0.5));
}

TEST_CASE("psnr closed forms") {
  const auto a = Tensor64::full({1, 3, 16, 16}, 0.3);
  CHECK(std::abs(psnr(a, Tensor64::full({1, 3, 16, 16}, 0.4)) - 20.0) < 1e-6);
  CHECK(psnr(Tensor64::zeros({1, 3, 4, 4}), Tensor64::full({1, 3, 4, 4}, 0.5)) ==
        doctest::Approx(6.0206).epsilon(1e-5));
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK(ssim_rgb(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  Rng rng(6);
  const auto x = rand64({1, 3, 16, 16}, rng), y = rand64({1, 3, 16, 16}, rng);
  double per = 0;
  for (int c = 0; c < 3; ++c) per += ssim(narrow(x, 1, c, 1), narrow(y, 1, c, 1)).item();
  CHECK(ssim_rgb(x, y) == doctest::Approx(per / 3).epsilon(1e-12));
  CHECK(ssim_luma(x, y) == doctest::Approx(ssim(to_grayscale(x), to_grayscale(y)).item()).epsilon(1e-12));
  const auto cl = clamp01(Tensor64({3}, {-0.5, 0.5, 1.5}));
  CHECK((cl.at({0}) == 0 && cl.at({1}) == 0.5 && cl.at({2}) == 1));
}
