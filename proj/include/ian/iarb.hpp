#pragma once

// Illumination-aware residual block.
//
//   R_ori  = cat(conv_d1(F_in), conv_d2(F_in), conv_d3(F_in))
//   desc_mu    = F_mu(cat(mean_hw(R_ori), light?))
//   desc_sigma = F_sigma(cat(std_hw(R_ori), light?))
//   R_rr   = R_ori * (desc_mu + desc_sigma) / 2      (per channel, per sample)
//   F_out  = C_f(R_rr) + F_in
//
// The ablation variants reuse the same weight container.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ian/nn_ops.hpp"

namespace ian {

enum class BlockVariant {
  full,        // dilations 1,2,3 with mean+std attention
  vanilla,     // conv-relu-conv + residual
  wo_att,      // dilated branches + compression, no descriptor product
  wo_dilated,  // full attention with all branch dilations 1
  mean_att,    // attention from desc_mu only
  std_att,     // attention from desc_sigma only
};

std::string to_string(BlockVariant v);
BlockVariant block_variant_from_string(const std::string& s);
bool uses_attention(BlockVariant v);

struct IARBSpec {
  std::int64_t channels = 48;         // block input/output channels
  std::int64_t branch_channels = 48;  // per dilated branch
  std::int64_t light_dim = 0;         // >0: light-conditioned descriptors
  BlockVariant variant = BlockVariant::full;

  std::int64_t descriptor_dim() const { return 3 * branch_channels; }
};

template <typename T>
struct IARBWeights {
  IARBSpec spec;
  // Three parallel branches; for `vanilla` two sequential convolutions.
  std::vector<ConvWeights<T>> branches;
  std::optional<LinearWeights<T>> f_mu;
  std::optional<LinearWeights<T>> f_sigma;
  std::optional<ConvWeights<T>> compress;

  bool light_conditioned() const { return spec.light_dim > 0; }
  void append_params(const std::string& prefix, NamedParams<T>& out) const;
};

template <typename T>
IARBWeights<T> make_iarb_weights(const IARBSpec& spec, Rng& rng);

/// Number of stored scalars for a block built from `spec`.
std::int64_t iarb_param_count(const IARBSpec& spec);

template <typename T>
struct Descriptor {
  BasicTensor<T> mu;     // [N, 3*branch]
  BasicTensor<T> sigma;  // [N, 3*branch]
};

template <typename T>
BasicTensor<T> dilated_branches(const BasicTensor<T>& f_in, const IARBWeights<T>& w);

/// Descriptors that the variant does not use are left undefined.
template <typename T>
Descriptor<T> extract_descriptors(const BasicTensor<T>& r_ori, const IARBWeights<T>& w,
                                  const BasicTensor<T>* light_embed = nullptr);

template <typename T>
BasicTensor<T> iarb_forward(const BasicTensor<T>& f_in, const IARBWeights<T>& w,
                            const BasicTensor<T>* light_embed = nullptr);

// ---------------------------------------------------------------------------
// Target light projector: 9 -> hidden -> hidden -> blocks * embed_dim.

struct ProjectorSpec {
  std::int64_t sh_dim = 9;
  std::int64_t hidden = 1024;
  std::int64_t embed_dim = 192;
  std::int64_t blocks = 12;
};

template <typename T>
struct LightProjectorWeights {
  ProjectorSpec spec;
  LinearWeights<T> fc1, fc2, fc3;
  void append_params(const std::string& prefix, NamedParams<T>& out) const;
};

template <typename T>
LightProjectorWeights<T> make_projector_weights(const ProjectorSpec& spec, Rng& rng);
std::int64_t projector_param_count(const ProjectorSpec& spec);

/// sh [N, 9] -> `blocks` embeddings [N, embed_dim], contiguous slices of the
/// final layer output in order.
template <typename T>
std::vector<BasicTensor<T>> project_light(const BasicTensor<T>& sh, const LightProjectorWeights<T>& w);

}  // namespace ian
