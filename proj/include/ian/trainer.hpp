#pragma once

// Training and evaluation loops, parameter / MAC accounting and the
// checkpoint file format.
//
// Checkpoint layout (little-endian):
//   "IANCKPT" (7 bytes) | u16 version | u32 header length | JSON header |
//   raw float32 arrays at the offsets listed in the header.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ian/config.hpp"

namespace ian {

using Model = IANModel<float>;

// ---------------------------------------------------------------------------
// Accounting

/// Exact number of stored scalars, computed from the configuration alone.
std::int64_t count_params(const IANConfig& cfg);

/// k^2 Cin Cout Hout Wout for one convolution.
double conv_macs(std::int64_t in, std::int64_t out, std::int64_t oh, std::int64_t ow, std::int64_t k = 3);

struct MacsReport {
  std::map<std::string, double> modules;  // headline contributions per module
  double total = 0;                       // sum of `modules`
  double resampling = 0;                  // bilinear/bicubic multiplies, reported separately
};

/// k^2 Cin Cout Hout Wout over every convolution plus in*out per linear
/// layer and sample, for one image of H x W.
MacsReport estimate_macs(const IANConfig& cfg, std::int64_t h, std::int64_t w);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr char kCheckpointMagic[] = "IANCKPT";
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  IANConfig config;
  LossWeights loss;
  std::vector<std::pair<std::string, Tensor>> params;
  AdamState<float> adam;  // moments empty when never stepped
  std::int64_t iteration = 0;
  std::string rng_state;
};

Checkpoint make_checkpoint(const Model& model, const AdamState<float>& adam, const LossWeights& loss,
                           std::int64_t iteration, const std::string& rng_state);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint arrays into `model`; the name sets and shapes must match.
void restore_parameters(Model& model, const Checkpoint& ckpt);
/// Builds a model of the checkpoint's configuration holding its weights.
Model model_from_checkpoint(const Checkpoint& ckpt);

// ---------------------------------------------------------------------------
// Training

struct IntervalLog {
  std::int64_t iteration = 0;  // last iteration of the interval (1-based)
  double loss = 0;             // mean total loss over the interval
  double seconds = 0;          // wall clock since start
};

struct ImageMetrics {
  std::string name;
  double psnr = 0, ssim_rgb = 0, ssim_luma = 0;
  double copy_psnr = 0, copy_ssim_rgb = 0, copy_ssim_luma = 0;  // input vs target
};

struct EvalResult {
  std::vector<ImageMetrics> images;
  double psnr = 0, ssim_rgb = 0, ssim_luma = 0;
  double copy_psnr = 0, copy_ssim_rgb = 0, copy_ssim_luma = 0;
};

struct TrainReport {
  std::vector<IntervalLog> intervals;
  std::vector<std::pair<std::int64_t, EvalResult>> evals;
  double seconds = 0;
  std::int64_t iterations = 0;
};

/// Raises when the dataset lacks data the configuration needs (depth for
/// DGGE, light metadata for the projector) or has unusable image sizes.
void check_compatible(const IANConfig& cfg, const Dataset& data);

/// Ground-truth pyramid: bicubic downsamples of `target`, finest first.
Tensor downsample_target(const Tensor& target, int level);

class Trainer {
 public:
  Trainer(const RunConfig& cfg, const Dataset& train);
  /// Continues from a checkpoint; the model configuration must match.
  Trainer(const RunConfig& cfg, const Dataset& train, const Checkpoint& resume);

  /// One optimisation step; returns the total loss.
  double step();
  /// Runs until `iterations` steps have been taken in total.
  TrainReport run(const Dataset* eval = nullptr,
                  const std::function<void(const IntervalLog&)>& on_log = nullptr);

  const Model& model() const { return model_; }
  Model& model() { return model_; }
  const AdamState<float>& adam() const { return adam_; }
  std::int64_t iteration() const { return iteration_; }
  Checkpoint checkpoint() const;

 private:
  RunConfig cfg_;
  const Dataset* data_;
  Model model_;
  AdamState<float> adam_;
  BatchStream stream_;
  std::int64_t iteration_ = 0;
};

/// Full-resolution outputs clamped to [0,1] for each pair, in batches.
/// `light_override` replaces the target light for every pair (projector models).
std::vector<Tensor> infer_dataset(const Model& model, const Dataset& data, int batch_size = 5,
                                  const std::optional<SHLight>& light_override = std::nullopt);

EvalResult evaluate(const Model& model, const Dataset& data, int batch_size = 5);

json to_json(const IntervalLog& l);
json to_json(const EvalResult& r, bool per_image = false);

}  // namespace ian
