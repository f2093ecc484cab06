#include "ian/iarb.hpp"

namespace ian {

std::string to_string(BlockVariant v) {
  switch (v) {
    case BlockVariant::full:
      return "full";
    case BlockVariant::vanilla:
      return "vanilla";
    case BlockVariant::wo_att:
      return "wo_att";
    case BlockVariant::wo_dilated:
      return "wo_dilated";
    case BlockVariant::mean_att:
      return "mean_att";
    case BlockVariant::std_att:
      return "std_att";
  }
  return "full";
}

BlockVariant block_variant_from_string(const std::string& s) {
  for (auto v : {BlockVariant::full, BlockVariant::vanilla, BlockVariant::wo_att, BlockVariant::wo_dilated,
                 BlockVariant::mean_att, BlockVariant::std_att})
    if (to_string(v) == s) return v;
  throw Error("unknown block variant '" + s + "'");
}

bool uses_attention(BlockVariant v) { return v != BlockVariant::vanilla && v != BlockVariant::wo_att; }

namespace {
bool uses_mu(BlockVariant v) { return uses_attention(v) && v != BlockVariant::std_att; }
bool uses_sigma(BlockVariant v) { return uses_attention(v) && v != BlockVariant::mean_att; }

std::int64_t conv_count(std::int64_t in, std::int64_t out) { return 9 * in * out + out; }
std::int64_t linear_count(std::int64_t in, std::int64_t out) { return in * out + out; }
}  // namespace

std::int64_t iarb_param_count(const IARBSpec& s) {
  if (s.variant == BlockVariant::vanilla) return 2 * conv_count(s.channels, s.channels);
  const auto d = s.descriptor_dim();
  std::int64_t n = 3 * conv_count(s.channels, s.branch_channels) + conv_count(d, s.channels);
  if (uses_mu(s.variant)) n += linear_count(d + s.light_dim, d);
  if (uses_sigma(s.variant)) n += linear_count(d + s.light_dim, d);
  return n;
}

template <typename T>
IARBWeights<T> make_iarb_weights(const IARBSpec& spec, Rng& rng) {
  check(spec.channels > 0 && spec.branch_channels > 0, "IARB: channel counts must be positive");
  check(spec.light_dim == 0 || uses_attention(spec.variant),
        "IARB: variant '" + to_string(spec.variant) + "' cannot take a light embedding");
  IARBWeights<T> w;
  w.spec = spec;
  if (spec.variant == BlockVariant::vanilla) {
    w.branches.push_back(make_conv<T>(spec.channels, spec.channels, rng));
    w.branches.push_back(make_conv<T>(spec.channels, spec.channels, rng));
    return w;
  }
  const bool dilated = spec.variant != BlockVariant::wo_dilated;
  for (int d = 1; d <= 3; ++d) w.branches.push_back(make_conv<T>(spec.channels, spec.branch_channels, rng, 1, dilated ? d : 1));
  const auto dd = spec.descriptor_dim();
  if (uses_mu(spec.variant)) w.f_mu = make_linear<T>(dd + spec.light_dim, dd, rng);
  if (uses_sigma(spec.variant)) w.f_sigma = make_linear<T>(dd + spec.light_dim, dd, rng);
  w.compress = make_conv<T>(dd, spec.channels, rng);
  return w;
}

template <typename T>
void IARBWeights<T>::append_params(const std::string& prefix, NamedParams<T>& out) const {
  if (spec.variant == BlockVariant::vanilla) {
    ian::append_params(branches[0], prefix + ".conv1", out);
    ian::append_params(branches[1], prefix + ".conv2", out);
    return;
  }
  for (std::size_t i = 0; i < branches.size(); ++i)
    ian::append_params(branches[i], prefix + ".branch" + std::to_string(i + 1), out);
  if (f_mu) ian::append_params(*f_mu, prefix + ".f_mu", out);
  if (f_sigma) ian::append_params(*f_sigma, prefix + ".f_sigma", out);
  if (compress) ian::append_params(*compress, prefix + ".compress", out);
}

template <typename T>
BasicTensor<T> dilated_branches(const BasicTensor<T>& f_in, const IARBWeights<T>& w) {
  check(w.spec.variant != BlockVariant::vanilla, "dilated_branches: vanilla block has no branches");
  check(f_in.rank() == 4 && f_in.dim(1) == w.spec.channels,
        "dilated_branches: expected " + std::to_string(w.spec.channels) + " input channels, got " +
            shape_str(f_in.shape()));
  std::vector<BasicTensor<T>> outs;
  for (const auto& b : w.branches) outs.push_back(conv2d(f_in, b));
  return concat_channels(outs);
}

template <typename T>
Descriptor<T> extract_descriptors(const BasicTensor<T>& r_ori, const IARBWeights<T>& w,
                                  const BasicTensor<T>* light_embed) {
  check(uses_attention(w.spec.variant), "extract_descriptors: variant has no attention");
  check((light_embed != nullptr) == w.light_conditioned(),
        w.light_conditioned() ? "extract_descriptors: light-conditioned block needs a light embedding"
                              : "extract_descriptors: block is not light-conditioned");
  check(r_ori.rank() == 4 && r_ori.dim(1) == w.spec.descriptor_dim(), "extract_descriptors: R_ori channel mismatch");
  auto with_light = [&](const BasicTensor<T>& stat) {
    if (!light_embed) return stat;
    check(light_embed->rank() == 2 && light_embed->dim(0) == stat.dim(0) && light_embed->dim(1) == w.spec.light_dim,
          "extract_descriptors: light embedding must be [N," + std::to_string(w.spec.light_dim) + "]");
    return concat(std::vector<BasicTensor<T>>{stat, *light_embed}, 1);
  };
  Descriptor<T> d;
  if (w.f_mu) d.mu = linear(with_light(global_avg_pool(r_ori)), *w.f_mu);
  if (w.f_sigma) d.sigma = linear(with_light(channel_std(r_ori)), *w.f_sigma);
  return d;
}

template <typename T>
BasicTensor<T> iarb_forward(const BasicTensor<T>& f_in, const IARBWeights<T>& w, const BasicTensor<T>* light_embed) {
  check(f_in.rank() == 4 && f_in.dim(1) == w.spec.channels,
        "iarb_forward: expected " + std::to_string(w.spec.channels) + " channels, got " + shape_str(f_in.shape()));
  if (w.spec.variant == BlockVariant::vanilla) {
    check(light_embed == nullptr, "iarb_forward: vanilla block cannot take a light embedding");
    return add(conv2d(relu(conv2d(f_in, w.branches[0])), w.branches[1]), f_in);
  }
  const auto r_ori = dilated_branches(f_in, w);
  BasicTensor<T> r_rr = r_ori;
  if (uses_attention(w.spec.variant)) {
    const auto d = extract_descriptors(r_ori, w, light_embed);
    BasicTensor<T> att;
    if (d.mu.defined() && d.sigma.defined())
      att = mul_scalar(add(d.mu, d.sigma), T(0.5));
    else
      att = d.mu.defined() ? d.mu : d.sigma;
    r_rr = mul(r_ori, reshape(att, {att.dim(0), att.dim(1), 1, 1}));
  } else {
    check(light_embed == nullptr, "iarb_forward: block without attention cannot take a light embedding");
  }
  return add(conv2d(r_rr, *w.compress), f_in);
}

// ---------------------------------------------------------------------------

std::int64_t projector_param_count(const ProjectorSpec& s) {
  return linear_count(s.sh_dim, s.hidden) + linear_count(s.hidden, s.hidden) +
         linear_count(s.hidden, s.blocks * s.embed_dim);
}

template <typename T>
LightProjectorWeights<T> make_projector_weights(const ProjectorSpec& spec, Rng& rng) {
  check(spec.sh_dim > 0 && spec.hidden > 0 && spec.embed_dim > 0 && spec.blocks > 0,
        "projector: dimensions must be positive");
  LightProjectorWeights<T> w;
  w.spec = spec;
  w.fc1 = make_linear<T>(spec.sh_dim, spec.hidden, rng);
  w.fc2 = make_linear<T>(spec.hidden, spec.hidden, rng);
  w.fc3 = make_linear<T>(spec.hidden, spec.blocks * spec.embed_dim, rng);
  return w;
}

template <typename T>
void LightProjectorWeights<T>::append_params(const std::string& prefix, NamedParams<T>& out) const {
  ian::append_params(fc1, prefix + ".fc1", out);
  ian::append_params(fc2, prefix + ".fc2", out);
  ian::append_params(fc3, prefix + ".fc3", out);
}

template <typename T>
std::vector<BasicTensor<T>> project_light(const BasicTensor<T>& sh, const LightProjectorWeights<T>& w) {
  check(sh.rank() == 2 && sh.dim(1) == w.spec.sh_dim,
        "project_light: expected [N," + std::to_string(w.spec.sh_dim) + "] coefficients, got " + shape_str(sh.shape()));
  const auto h = relu(linear(relu(linear(sh, w.fc1)), w.fc2));
  const auto all = linear(h, w.fc3);
  std::vector<BasicTensor<T>> out;
  for (std::int64_t b = 0; b < w.spec.blocks; ++b) out.push_back(narrow(all, 1, b * w.spec.embed_dim, w.spec.embed_dim));
  return out;
}

#define IAN_INSTANTIATE(T)                                                                                   \
  template struct IARBWeights<T>;                                                                            \
  template struct LightProjectorWeights<T>;                                                                  \
  template IARBWeights<T> make_iarb_weights(const IARBSpec&, Rng&);                                          \
  template BasicTensor<T> dilated_branches(const BasicTensor<T>&, const IARBWeights<T>&);                    \
  template Descriptor<T> extract_descriptors(const BasicTensor<T>&, const IARBWeights<T>&, const BasicTensor<T>*); \
  template BasicTensor<T> iarb_forward(const BasicTensor<T>&, const IARBWeights<T>&, const BasicTensor<T>*); \
  template LightProjectorWeights<T> make_projector_weights(const ProjectorSpec&, Rng&);                      \
  template std::vector<BasicTensor<T>> project_light(const BasicTensor<T>&, const LightProjectorWeights<T>&);

IAN_INSTANTIATE(float)
IAN_INSTANTIATE(double)

}  // namespace ian
