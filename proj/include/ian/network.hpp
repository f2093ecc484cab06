#pragma once

// Illumination-aware network: a coarse-to-fine pyramid of encoder /
// IARB bottleneck / decoder levels with intra-level (ILSC), cross-level
// (CLSC) and image-content (ICSC) skip connections, plus the depth-guided
// geometry encoder (DGGE) shared by all levels.
//
// Level 0 is the finest (full resolution); level L-1 the coarsest.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ian/iarb.hpp"

namespace ian {

struct IANConfig {
  int levels = 3;
  int blocks = 4;
  std::int64_t channels = 48;
  std::int64_t image_size = 1024;  // nominal input size; used for accounting
  bool use_dgge = true;
  bool use_light_projector = false;
  BlockVariant block = BlockVariant::full;
  // Skip-connection and guidance ablations.
  bool use_ilsc = true;
  bool use_clsc = true;
  bool use_icsc = true;
  bool guide_depth = true;
  bool guide_normal = true;
  bool guide_pe = true;
  std::int64_t projector_hidden = 1024;
  std::int64_t light_embed_dim = 192;

  void validate() const;
  /// Input extents must be multiples of this.
  std::int64_t spatial_multiple() const { return std::int64_t{1} << (levels + 1); }
  std::int64_t guidance_channels() const;
  IARBSpec block_spec() const;
  ProjectorSpec projector_spec() const;
  bool operator==(const IANConfig&) const = default;
};

inline constexpr int kDggeStages = 5;

/// DGGE stage fused into encoder scale `scale` of pyramid level `level`, or
/// -1 when the index would exceed the last stage (only for L = 4).
int dgge_stage_for(int level, int scale);

// ---------------------------------------------------------------------------
// Guidance

template <typename T>
struct GuidancePack {
  BasicTensor<T> depth;   // [N,1,H,W] in [0,1]
  BasicTensor<T> normal;  // [N,3,H,W] unit vectors
  BasicTensor<T> pe;      // [1,2,H,W] in [-1,1)
};

/// Central differences with replicated borders, z = -1, normalised.
template <typename T>
BasicTensor<T> normal_from_depth(const BasicTensor<T>& depth);

/// channel 0 = 2x/W - 1, channel 1 = 2y/H - 1.
template <typename T>
BasicTensor<T> linear_positional_encoding(std::int64_t h, std::int64_t w);

/// Per-image min/max normalisation to [0,1]; constant maps become zeros.
template <typename T>
BasicTensor<T> normalize_depth(const BasicTensor<T>& depth);

template <typename T>
GuidancePack<T> make_guidance(const BasicTensor<T>& raw_depth);

/// Stacks the enabled guidance channels (depth, normal, pe) as DGGE input.
template <typename T>
BasicTensor<T> guidance_input(const GuidancePack<T>& g, const IANConfig& cfg);

// ---------------------------------------------------------------------------
// Weights

template <typename T>
struct DGGEWeights {
  std::vector<std::array<ConvWeights<T>, 2>> stages;
};

template <typename T>
struct LevelWeights {
  std::vector<ConvWeights<T>> encoder;  // 6 convs: scale0 x2, scale1 (s2, s1), scale2 (s2, s1)
  std::vector<IARBWeights<T>> blocks;
  std::vector<ConvWeights<T>> decoder;  // 9 convs, three per scale (coarse to fine)
  ConvWeights<T> head;                  // channels -> 3
};

template <typename T>
std::vector<BasicTensor<T>> dgge_forward(const BasicTensor<T>& guidance_in, const DGGEWeights<T>& w);

/// Returns the three encoder scales E_0, E_1, E_2. When `guidance` is given
/// each E_i is incremented by its DGGE stage before use.
template <typename T>
std::array<BasicTensor<T>, 3> encoder_forward(int level, const BasicTensor<T>& x, const LevelWeights<T>& w,
                                              const std::vector<BasicTensor<T>>* guidance);

template <typename T>
struct DecoderOutput {
  BasicTensor<T> residual;                // [N,3,H_l,W_l]
  std::array<BasicTensor<T>, 3> features;  // D_0, D_1, D_2
};

template <typename T>
DecoderOutput<T> decoder_forward(const BasicTensor<T>& bottleneck_out, const std::array<BasicTensor<T>, 3>& enc,
                                 const std::array<BasicTensor<T>, 3>* coarser, const LevelWeights<T>& w,
                                 bool use_ilsc);

// ---------------------------------------------------------------------------

template <typename T>
class IANModel {
 public:
  IANModel(const IANConfig& cfg, std::uint64_t seed);

  const IANConfig& config() const { return cfg_; }
  /// Stable order; checkpoint and optimizer state follow it.
  NamedParams<T> named_parameters() const;
  std::vector<BasicTensor<T>> parameters() const;
  std::int64_t parameter_count() const;
  void zero_grad() const;

  /// Outputs indexed by level: [0] full resolution, [L-1] coarsest.
  /// `depth` ([N,1,H,W], any units) is required iff DGGE is enabled and
  /// `light` ([N,9]) iff the light projector is enabled.
  std::vector<BasicTensor<T>> forward(const BasicTensor<T>& input, const BasicTensor<T>* depth = nullptr,
                                      const BasicTensor<T>* light = nullptr) const;

  const std::vector<LevelWeights<T>>& levels() const { return levels_; }
  std::vector<LevelWeights<T>>& levels() { return levels_; }
  const std::optional<DGGEWeights<T>>& dgge() const { return dgge_; }
  const std::optional<LightProjectorWeights<T>>& projector() const { return projector_; }

 private:
  IANConfig cfg_;
  std::vector<LevelWeights<T>> levels_;
  std::optional<DGGEWeights<T>> dgge_;
  std::optional<LightProjectorWeights<T>> projector_;
};

}  // namespace ian
