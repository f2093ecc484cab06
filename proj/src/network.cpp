#include "ian/network.hpp"

#include <algorithm>
#include <cmath>

namespace ian {

void IANConfig::validate() const {
  check(levels >= 1 && levels <= 4, "config: levels must be in [1,4], got " + std::to_string(levels));
  check(blocks >= 1 && blocks <= 6, "config: blocks must be in [1,6], got " + std::to_string(blocks));
  check(channels >= 1, "config: channels must be positive");
  check(image_size > 0 && image_size % spatial_multiple() == 0,
        "config: image_size " + std::to_string(image_size) + " must be a multiple of " +
            std::to_string(spatial_multiple()));
  check(!use_dgge || guidance_channels() > 0, "config: DGGE enabled with every guidance input disabled");
  check(!use_light_projector || uses_attention(block),
        "config: light projector requires an attention block variant, not '" + to_string(block) + "'");
  check(projector_hidden > 0 && light_embed_dim > 0, "config: projector sizes must be positive");
}

std::int64_t IANConfig::guidance_channels() const {
  return (guide_depth ? 1 : 0) + (guide_normal ? 3 : 0) + (guide_pe ? 2 : 0);
}

IARBSpec IANConfig::block_spec() const {
  IARBSpec s;
  s.channels = channels;
  s.branch_channels = channels;
  s.light_dim = use_light_projector ? light_embed_dim : 0;
  s.variant = block;
  return s;
}

ProjectorSpec IANConfig::projector_spec() const {
  ProjectorSpec p;
  p.hidden = projector_hidden;
  p.embed_dim = light_embed_dim;
  p.blocks = static_cast<std::int64_t>(levels) * blocks;
  return p;
}

int dgge_stage_for(int level, int scale) {
  const int k = level + scale;
  return k < kDggeStages ? k : -1;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> normalize_depth(const BasicTensor<T>& depth) {
  check(depth.rank() == 4 && depth.dim(1) == 1, "normalize_depth: expected [N,1,H,W], got " + shape_str(depth.shape()));
  const auto n = depth.dim(0);
  const auto plane = depth.dim(2) * depth.dim(3);
  std::vector<T> out(depth.numel());
  const auto src = depth.data();
  for (std::int64_t b = 0; b < n; ++b) {
    const T* p = src.data() + b * plane;
    const auto [lo, hi] = std::minmax_element(p, p + plane);
    const T range = *hi - *lo;
    for (std::int64_t i = 0; i < plane; ++i) out[b * plane + i] = range > T(0) ? (p[i] - *lo) / range : T(0);
  }
  return BasicTensor<T>(depth.shape(), std::move(out));
}

template <typename T>
BasicTensor<T> normal_from_depth(const BasicTensor<T>& depth) {
  check(depth.rank() == 4 && depth.dim(1) == 1, "normal_from_depth: expected [N,1,H,W], got " + shape_str(depth.shape()));
  const auto n = depth.dim(0), h = depth.dim(2), w = depth.dim(3);
  const auto plane = h * w;
  const auto d = depth.data();
  std::vector<T> out(static_cast<std::size_t>(n * 3 * plane));
  for (std::int64_t b = 0; b < n; ++b) {
    const T* p = d.data() + b * plane;
    T* o = out.data() + b * 3 * plane;
    for (std::int64_t y = 0; y < h; ++y) {
      const auto ym = std::max<std::int64_t>(y - 1, 0), yp = std::min(y + 1, h - 1);
      for (std::int64_t x = 0; x < w; ++x) {
        const auto xm = std::max<std::int64_t>(x - 1, 0), xp = std::min(x + 1, w - 1);
        const double gx = (double(p[y * w + xp]) - double(p[y * w + xm])) / 2.0;
        const double gy = (double(p[yp * w + x]) - double(p[ym * w + x])) / 2.0;
        const double inv = 1.0 / std::sqrt(gx * gx + gy * gy + 1.0);
        o[y * w + x] = static_cast<T>(gx * inv);
        o[plane + y * w + x] = static_cast<T>(gy * inv);
        o[2 * plane + y * w + x] = static_cast<T>(-inv);
      }
    }
  }
  return BasicTensor<T>({n, 3, h, w}, std::move(out));
}

template <typename T>
BasicTensor<T> linear_positional_encoding(std::int64_t h, std::int64_t w) {
  check(h >= 1 && w >= 1, "linear_positional_encoding: extents must be positive");
  std::vector<T> out(static_cast<std::size_t>(2 * h * w));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      out[y * w + x] = static_cast<T>(2.0 * double(x) / double(w) - 1.0);
      out[h * w + y * w + x] = static_cast<T>(2.0 * double(y) / double(h) - 1.0);
    }
  return BasicTensor<T>({1, 2, h, w}, std::move(out));
}

template <typename T>
GuidancePack<T> make_guidance(const BasicTensor<T>& raw_depth) {
  GuidancePack<T> g;
  g.depth = normalize_depth(raw_depth);
  g.normal = normal_from_depth(g.depth);
  g.pe = linear_positional_encoding<T>(raw_depth.dim(2), raw_depth.dim(3));
  return g;
}

template <typename T>
BasicTensor<T> guidance_input(const GuidancePack<T>& g, const IANConfig& cfg) {
  std::vector<BasicTensor<T>> parts;
  const auto n = g.depth.dim(0);
  if (cfg.guide_depth) parts.push_back(g.depth);
  if (cfg.guide_normal) parts.push_back(g.normal);
  if (cfg.guide_pe) {
    std::vector<BasicTensor<T>> rep(static_cast<std::size_t>(n), g.pe);
    parts.push_back(n == 1 ? g.pe : concat(rep, 0));
  }
  check(!parts.empty(), "guidance_input: no guidance channel enabled");
  return concat_channels(parts);
}

// ---------------------------------------------------------------------------

template <typename T>
std::vector<BasicTensor<T>> dgge_forward(const BasicTensor<T>& guidance_in, const DGGEWeights<T>& w) {
  check(!w.stages.empty(), "dgge_forward: no stages");
  check(guidance_in.rank() == 4 && guidance_in.dim(1) == w.stages[0][0].in_channels(),
        "dgge_forward: expected " + std::to_string(w.stages[0][0].in_channels()) + " guidance channels, got " +
            shape_str(guidance_in.shape()));
  std::vector<BasicTensor<T>> out;
  // Stage 0 skips the leading activation so signed guidance (normals,
  // positional encoding) reaches the first convolution intact.
  BasicTensor<T> x = conv2d(relu(conv2d(guidance_in, w.stages[0][0])), w.stages[0][1]);
  out.push_back(x);
  for (std::size_t k = 1; k < w.stages.size(); ++k) {
    x = conv2d(relu(conv2d(relu(x), w.stages[k][0])), w.stages[k][1]);
    out.push_back(x);
  }
  return out;
}

template <typename T>
std::array<BasicTensor<T>, 3> encoder_forward(int level, const BasicTensor<T>& x, const LevelWeights<T>& w,
                                              const std::vector<BasicTensor<T>>* guidance) {
  check(w.encoder.size() == 6, "encoder_forward: level weights must hold 6 encoder convolutions");
  check(x.rank() == 4 && x.dim(1) == w.encoder[0].in_channels(),
        "encoder_forward: expected " + std::to_string(w.encoder[0].in_channels()) + " input channels, got " +
            shape_str(x.shape()));
  auto fuse = [&](BasicTensor<T> e, int scale) {
    if (!guidance) return e;
    const int k = dgge_stage_for(level, scale);
    if (k < 0 || k >= static_cast<int>(guidance->size())) return e;
    const auto& c = (*guidance)[static_cast<std::size_t>(k)];
    check(c.shape() == e.shape(), "encoder_forward: DGGE stage " + std::to_string(k) + " shape " +
                                      shape_str(c.shape()) + " does not match encoder scale " + shape_str(e.shape()));
    return add(e, c);
  };
  std::array<BasicTensor<T>, 3> e;
  e[0] = fuse(relu(conv2d(relu(conv2d(x, w.encoder[0])), w.encoder[1])), 0);
  e[1] = fuse(relu(conv2d(relu(conv2d(e[0], w.encoder[2])), w.encoder[3])), 1);
  e[2] = fuse(conv2d(relu(conv2d(e[1], w.encoder[4])), w.encoder[5]), 2);
  return e;
}

template <typename T>
DecoderOutput<T> decoder_forward(const BasicTensor<T>& bottleneck_out, const std::array<BasicTensor<T>, 3>& enc,
                                 const std::array<BasicTensor<T>, 3>* coarser, const LevelWeights<T>& w,
                                 bool use_ilsc) {
  check(w.decoder.size() == 9, "decoder_forward: level weights must hold 9 decoder convolutions");
  check(bottleneck_out.shape() == enc[2].shape(), "decoder_forward: bottleneck shape " +
                                                      shape_str(bottleneck_out.shape()) + " != " +
                                                      shape_str(enc[2].shape()));
  DecoderOutput<T> out;
  BasicTensor<T> x = relu(bottleneck_out);
  for (int s = 2; s >= 0; --s) {
    for (int j = 0; j < 3; ++j) x = relu(conv2d(x, w.decoder[static_cast<std::size_t>((2 - s) * 3 + j)]));
    const auto& e = enc[static_cast<std::size_t>(s)];
    check(x.shape() == e.shape(), "decoder_forward: scale " + std::to_string(s) + " shape " + shape_str(x.shape()) +
                                      " does not mirror encoder " + shape_str(e.shape()));
    if (use_ilsc) x = add(x, e);
    if (coarser) {
      const auto up = upsample_bilinear2x((*coarser)[static_cast<std::size_t>(s)]);
      check(up.shape() == x.shape(), "decoder_forward: coarser feature " + shape_str(up.shape()) +
                                         " does not match " + shape_str(x.shape()));
      x = add(x, up);
    }
    out.features[static_cast<std::size_t>(s)] = x;
    if (s > 0) x = upsample_bilinear2x(x);
  }
  out.residual = conv2d(x, w.head);
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
IANModel<T>::IANModel(const IANConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const auto c = cfg_.channels;
  if (cfg_.use_dgge) {
    DGGEWeights<T> d;
    for (int k = 0; k < kDggeStages; ++k) {
      const auto in = k == 0 ? cfg_.guidance_channels() : c;
      d.stages.push_back({make_conv<T>(in, c, rng, k == 0 ? 1 : 2), make_conv<T>(c, c, rng)});
    }
    dgge_ = std::move(d);
  }
  // Coarsest level first, matching the order in which levels run.
  levels_.resize(static_cast<std::size_t>(cfg_.levels));
  for (int l = cfg_.levels - 1; l >= 0; --l) {
    auto& lw = levels_[static_cast<std::size_t>(l)];
    const std::int64_t in = l == cfg_.levels - 1 ? 3 : 6;
    lw.encoder = {make_conv<T>(in, c, rng),   make_conv<T>(c, c, rng), make_conv<T>(c, c, rng, 2),
                  make_conv<T>(c, c, rng),    make_conv<T>(c, c, rng, 2), make_conv<T>(c, c, rng)};
    for (int b = 0; b < cfg_.blocks; ++b) lw.blocks.push_back(make_iarb_weights<T>(cfg_.block_spec(), rng));
    for (int j = 0; j < 9; ++j) lw.decoder.push_back(make_conv<T>(c, c, rng));
    lw.head = make_conv<T>(c, 3, rng);
  }
  if (cfg_.use_light_projector) projector_ = make_projector_weights<T>(cfg_.projector_spec(), rng);
}

template <typename T>
NamedParams<T> IANModel<T>::named_parameters() const {
  NamedParams<T> out;
  if (dgge_)
    for (std::size_t k = 0; k < dgge_->stages.size(); ++k) {
      const auto p = "dgge.stage" + std::to_string(k);
      append_params(dgge_->stages[k][0], p + ".conv1", out);
      append_params(dgge_->stages[k][1], p + ".conv2", out);
    }
  for (int l = cfg_.levels - 1; l >= 0; --l) {
    const auto& lw = levels_[static_cast<std::size_t>(l)];
    const auto p = "level" + std::to_string(l);
    for (std::size_t j = 0; j < lw.encoder.size(); ++j) append_params(lw.encoder[j], p + ".enc" + std::to_string(j), out);
    for (std::size_t b = 0; b < lw.blocks.size(); ++b) lw.blocks[b].append_params(p + ".block" + std::to_string(b), out);
    for (std::size_t j = 0; j < lw.decoder.size(); ++j) append_params(lw.decoder[j], p + ".dec" + std::to_string(j), out);
    append_params(lw.head, p + ".head", out);
  }
  if (projector_) projector_->append_params("projector", out);
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> IANModel<T>::parameters() const {
  std::vector<BasicTensor<T>> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

template <typename T>
std::int64_t IANModel<T>::parameter_count() const {
  std::int64_t n = 0;
  for (auto& [name, t] : named_parameters()) n += static_cast<std::int64_t>(t.numel());
  return n;
}

template <typename T>
void IANModel<T>::zero_grad() const {
  for (auto& [name, t] : named_parameters()) {
    auto copy = t;
    copy.zero_grad();
  }
}

template <typename T>
std::vector<BasicTensor<T>> IANModel<T>::forward(const BasicTensor<T>& input, const BasicTensor<T>* depth,
                                                 const BasicTensor<T>* light) const {
  check(input.rank() == 4 && input.dim(1) == 3, "forward: expected input [N,3,H,W], got " + shape_str(input.shape()));
  const auto h = input.dim(2), w = input.dim(3), m = cfg_.spatial_multiple();
  check(h % m == 0 && w % m == 0, "forward: input extents " + std::to_string(h) + "x" + std::to_string(w) +
                                      " must be multiples of " + std::to_string(m));
  check((depth != nullptr) == cfg_.use_dgge,
        cfg_.use_dgge ? "forward: DGGE model requires a depth map" : "forward: model without DGGE takes no depth map");
  check((light != nullptr) == cfg_.use_light_projector,
        cfg_.use_light_projector ? "forward: light-conditioned model requires a target light"
                                 : "forward: model without light projector takes no target light");

  std::vector<BasicTensor<T>> guidance;
  if (depth) {
    check(depth->rank() == 4 && depth->dim(0) == input.dim(0) && depth->dim(1) == 1 && depth->dim(2) == h &&
              depth->dim(3) == w,
          "forward: depth must be [N,1,H,W] matching the input, got " + shape_str(depth->shape()));
    BasicTensor<T> gin;
    {
      NoGradGuard ng;
      gin = guidance_input(make_guidance(*depth), cfg_);
    }
    guidance = dgge_forward(gin, *dgge_);
  }
  std::vector<BasicTensor<T>> embeds;
  if (light) {
    check(light->rank() == 2 && light->dim(0) == input.dim(0),
          "forward: light must be [N,9], got " + shape_str(light->shape()));
    embeds = project_light(*light, *projector_);
  }

  const int L = cfg_.levels;
  std::vector<BasicTensor<T>> outputs(static_cast<std::size_t>(L));
  std::array<BasicTensor<T>, 3> coarser_feats;
  bool have_coarser = false;
  for (int l = L - 1; l >= 0; --l) {
    const auto& lw = levels_[static_cast<std::size_t>(l)];
    const double factor = 1.0 / double(std::int64_t{1} << l);
    BasicTensor<T> base;
    {
      NoGradGuard ng;
      base = resize_bicubic(input, factor);
    }
    BasicTensor<T> x = base;
    if (l < L - 1) x = concat_channels(std::vector<BasicTensor<T>>{base, resize_bicubic(outputs[static_cast<std::size_t>(l + 1)], 2.0)});
    const auto enc = encoder_forward(l, x, lw, guidance.empty() ? nullptr : &guidance);
    BasicTensor<T> f = enc[2];
    for (int b = 0; b < cfg_.blocks; ++b) {
      const BasicTensor<T>* e = nullptr;
      if (!embeds.empty()) e = &embeds[static_cast<std::size_t>((L - 1 - l) * cfg_.blocks + b)];
      f = iarb_forward(f, lw.blocks[static_cast<std::size_t>(b)], e);
    }
    auto dec = decoder_forward(f, enc, (cfg_.use_clsc && have_coarser) ? &coarser_feats : nullptr, lw, cfg_.use_ilsc);
    outputs[static_cast<std::size_t>(l)] = cfg_.use_icsc ? add(dec.residual, base) : dec.residual;
    coarser_feats = dec.features;
    have_coarser = true;
  }
  return outputs;
}

#define IAN_INSTANTIATE(T)                                                                                        \
  template BasicTensor<T> normalize_depth(const BasicTensor<T>&);                                                 \
  template BasicTensor<T> normal_from_depth(const BasicTensor<T>&);                                               \
  template BasicTensor<T> linear_positional_encoding<T>(std::int64_t, std::int64_t);                              \
  template GuidancePack<T> make_guidance(const BasicTensor<T>&);                                                  \
  template BasicTensor<T> guidance_input(const GuidancePack<T>&, const IANConfig&);                               \
  template std::vector<BasicTensor<T>> dgge_forward(const BasicTensor<T>&, const DGGEWeights<T>&);                \
  template std::array<BasicTensor<T>, 3> encoder_forward(int, const BasicTensor<T>&, const LevelWeights<T>&,      \
                                                         const std::vector<BasicTensor<T>>*);                     \
  template DecoderOutput<T> decoder_forward(const BasicTensor<T>&, const std::array<BasicTensor<T>, 3>&,          \
                                            const std::array<BasicTensor<T>, 3>*, const LevelWeights<T>&, bool); \
  template class IANModel<T>;

IAN_INSTANTIATE(float)
IAN_INSTANTIATE(double)

}  // namespace ian
