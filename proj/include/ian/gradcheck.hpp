#pragma once

// Finite-difference verification of every differentiable building block,
// run in 64-bit.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ian/tensor.hpp"

namespace ian {

struct GradcheckResult {
  std::string name;
  double max_rel_error = 0;
  double tolerance = 1e-4;
  std::int64_t elements = 0;  // gradient entries compared
  bool passed() const { return max_rel_error < tolerance; }
};

/// Elementwise |a - n| / max(|n|, 1e-3 * max|n|, 1e-12), maximised.
double gradient_rel_error(std::span<const double> analytic, std::span<const double> numeric);

/// Compares backward() of `loss` against central differences for each
/// tensor in `wrt` (perturbed in place; `loss` must re-read them).
GradcheckResult check_gradients(const std::string& name, const std::function<Tensor64()>& loss,
                                std::vector<Tensor64> wrt, double h = 1e-3, double tolerance = 1e-4);

struct GradcheckOptions {
  std::uint64_t seed = 1234;
  double h = 1e-3;
  bool include_network = true;  // tiny full-network spot check
};

/// Runs the standard suite: conv2d (strides 1-2, dilations 1-3), linear,
/// relu, pooling, channel std, resampling, IARB, the three losses and a
/// spot check of the whole network.
std::vector<GradcheckResult> run_gradcheck_suite(const GradcheckOptions& opt = {},
                                                 const std::function<void(const GradcheckResult&)>& on_result = nullptr);

}  // namespace ian
