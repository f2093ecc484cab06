#include "ian/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ian/iarb.hpp"
#include "ian/losses.hpp"
#include "ian/network.hpp"
#include "ian/nn_ops.hpp"

namespace ian {

double gradient_rel_error(std::span<const double> a, std::span<const double> n) {
  check(a.size() == n.size(), "gradient_rel_error: size mismatch");
  double scale = 0;
  for (double v : n) scale = std::max(scale, std::abs(v));
  const double floor = std::max(1e-3 * scale, 1e-12);
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - n[i]) / std::max(std::abs(n[i]), floor));
  return worst;
}

GradcheckResult check_gradients(const std::string& name, const std::function<Tensor64()>& loss,
                                std::vector<Tensor64> wrt, double h, double tolerance) {
  GradcheckResult r;
  r.name = name;
  r.tolerance = tolerance;
  for (auto& t : wrt) t.zero_grad();
  loss().backward();
  for (auto& t : wrt) {
    const std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                      : std::vector<double>(t.numel(), 0.0);
    auto data = t.mutable_data();
    const Tensor64 numeric = finite_diff_grad(
        [&](const Tensor64& probe) {
          const std::vector<double> saved(data.begin(), data.end());
          std::copy(probe.data().begin(), probe.data().end(), data.begin());
          const double v = loss().item();
          std::copy(saved.begin(), saved.end(), data.begin());
          return v;
        },
        t, h);
    r.max_rel_error = std::max(r.max_rel_error, gradient_rel_error(analytic, numeric.data()));
    r.elements += static_cast<std::int64_t>(t.numel());
  }
  return r;
}

namespace {

Tensor64 random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = true) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
  for (auto& e : v) e = rng.uniform(lo, hi);
  return Tensor64(s, std::move(v), grad);
}

// Values bounded away from zero so relu/abs kinks stay out of reach of h.
Tensor64 away_from_zero(const Shape& s, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
  for (auto& e : v) e = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return Tensor64(s, std::move(v), true);
}

// Weighted sum with fixed random weights, so every output entry matters.
Tensor64 probe_sum(const Tensor64& y, const Tensor64& r) { return sum_all(mul(y, r)); }

}  // namespace

std::vector<GradcheckResult> run_gradcheck_suite(const GradcheckOptions& opt,
                                                 const std::function<void(const GradcheckResult&)>& on_result) {
  Rng rng(opt.seed);
  const double h = opt.h;
  std::vector<GradcheckResult> out;
  auto record = [&](GradcheckResult r) {
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };

  for (int stride = 1; stride <= 2; ++stride)
    for (int dil = 1; dil <= 3; ++dil) {
      auto x = random_tensor({2, 3, 9, 8}, rng);
      auto k = random_tensor({4, 3, 3, 3}, rng);
      auto b = random_tensor({4}, rng);
      const auto r = random_tensor({2, 4, (9 + stride - 1) / stride, (8 + stride - 1) / stride}, rng, -1, 1, false);
      record(check_gradients("conv2d stride=" + std::to_string(stride) + " dilation=" + std::to_string(dil),
                             [=] { return probe_sum(conv2d(x, k, b, stride, dil), r); }, {x, k, b}, h));
    }
  {
    auto x = random_tensor({3, 7}, rng);
    LinearWeights<double> w{random_tensor({5, 7}, rng), random_tensor({5}, rng)};
    const auto r = random_tensor({3, 5}, rng, -1, 1, false);
    record(check_gradients("linear", [=] { return probe_sum(linear(x, w), r); }, {x, w.weight, w.bias}, h));
  }
  {
    auto x = away_from_zero({2, 3, 5, 4}, rng);
    const auto r = random_tensor({2, 3, 5, 4}, rng, -1, 1, false);
    record(check_gradients("relu", [=] { return probe_sum(relu(x), r); }, {x}, h));
  }
  {
    auto x = random_tensor({2, 4, 6, 5}, rng);
    const auto r = random_tensor({2, 4}, rng, -1, 1, false);
    record(check_gradients("global_avg_pool", [=] { return probe_sum(global_avg_pool(x), r); }, {x}, h));
    record(check_gradients("channel_std", [=] { return probe_sum(channel_std(x), r); }, {x}, h));
  }
  {
    auto x = random_tensor({2, 3, 5, 6}, rng);
    const auto r = random_tensor({2, 3, 10, 12}, rng, -1, 1, false);
    record(check_gradients("upsample_bilinear2x", [=] { return probe_sum(upsample_bilinear2x(x), r); }, {x}, h));
  }
  {
    auto x = random_tensor({1, 2, 8, 12}, rng);
    const auto rd = random_tensor({1, 2, 4, 6}, rng, -1, 1, false);
    const auto ru = random_tensor({1, 2, 16, 24}, rng, -1, 1, false);
    record(check_gradients("resize_bicubic 1/2", [=] { return probe_sum(resize_bicubic(x, 0.5), rd); }, {x}, h));
    record(check_gradients("resize_bicubic 2", [=] { return probe_sum(resize_bicubic(x, 2.0), ru); }, {x}, h));
  }
  for (const bool light : {false, true}) {
    IARBSpec spec;
    spec.channels = 4;
    spec.branch_channels = 3;
    spec.light_dim = light ? 5 : 0;
    auto w = make_iarb_weights<double>(spec, rng);
    // Non-zero biases so every path carries signal.
    NamedParams<double> named;
    w.append_params("iarb", named);
    for (auto& [n, t] : named)
      for (auto& v : t.mutable_data()) v += rng.uniform(-0.2, 0.2);
    auto x = random_tensor({2, 4, 6, 5}, rng);
    auto e = random_tensor({2, 5}, rng);
    const auto r = random_tensor({2, 4, 6, 5}, rng, -1, 1, false);
    std::vector<Tensor64> wrt{x};
    if (light) wrt.push_back(e);
    for (auto& [n, t] : named) wrt.push_back(t);
    record(check_gradients(light ? "iarb (light-conditioned)" : "iarb",
                           [=] { return probe_sum(iarb_forward(x, w, light ? &e : nullptr), r); }, wrt, h));
  }
  {
    auto a = random_tensor({2, 3, 12, 12}, rng, 0.0, 1.0);
    auto b0 = random_tensor({2, 3, 12, 12}, rng, 0.0, 1.0, false);
    // Keep |a - b| >= 0.05 so the L1 kink is never crossed.
    std::vector<double> bv(b0.data().begin(), b0.data().end());
    for (std::size_t i = 0; i < bv.size(); ++i) {
      const double d = a.data()[i] - bv[i];
      if (std::abs(d) < 0.05) bv[i] = a.data()[i] + (d >= 0 ? -0.05 : 0.05);
    }
    const Tensor64 b(b0.shape(), bv);
    record(check_gradients("l1_loss", [=] { return l1_loss(a, b); }, {a}, h));
    record(check_gradients("ssim_gray_loss", [=] { return ssim_gray_loss(a, b); }, {a}, h));
    record(check_gradients("gradient_loss", [=] { return gradient_loss(a, b); }, {a}, h));
  }
  if (opt.include_network) {
    IANConfig cfg;
    cfg.channels = 4;
    cfg.blocks = 1;
    cfg.image_size = 16;
    IANModel<double> model(cfg, opt.seed);
    auto named = model.named_parameters();
    for (auto& [n, t] : named)
      for (auto& v : t.mutable_data()) v += rng.uniform(-0.05, 0.05);
    const auto x = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0, false);
    const auto d = random_tensor({1, 1, 16, 16}, rng, 0.0, 1.0, false);
    std::vector<Tensor64> probes;
    for (int l = 0; l < cfg.levels; ++l)
      probes.push_back(random_tensor({1, 3, 16 >> l, 16 >> l}, rng, -1, 1, false));
    auto loss = [&] {
      const auto outs = model.forward(x, &d);
      Tensor64 s = probe_sum(outs[0], probes[0]);
      for (std::size_t l = 1; l < outs.size(); ++l) s = add(s, probe_sum(outs[l], probes[l]));
      return s;
    };
    model.zero_grad();
    loss().backward();
    // 20 randomly chosen scalar parameters.
    GradcheckResult r;
    r.name = "network (20 sampled parameters)";
    r.tolerance = 1e-3;
    std::vector<double> an, nu;
    for (int s = 0; s < 20; ++s) {
      auto& t = named[rng.below(named.size())].second;
      const auto i = rng.below(t.numel());
      an.push_back(t.has_grad() ? t.grad()[i] : 0.0);
      auto data = t.mutable_data();
      const double orig = data[i];
      NoGradGuard ng;
      data[i] = orig + h;
      const double fp = loss().item();
      data[i] = orig - h;
      const double fm = loss().item();
      data[i] = orig;
      nu.push_back((fp - fm) / (2 * h));
    }
    r.max_rel_error = gradient_rel_error(an, nu);
    r.elements = 20;
    record(r);
  }
  return out;
}

}  // namespace ian
