#include "ian/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

namespace ian {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Accounting

namespace {
std::int64_t conv_params(std::int64_t in, std::int64_t out) { return 9 * in * out + out; }

// Multiplies of one separable resample of a C-channel map.
double resample_macs(Filter f, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t oh, std::int64_t ow) {
  const auto tw = ResampleTable::build(f, w, ow);
  const auto th = ResampleTable::build(f, h, oh);
  return double(c) * (double(h) * double(tw.idx.size()) + double(ow) * double(th.idx.size()));
}
}  // namespace

double conv_macs(std::int64_t in, std::int64_t out, std::int64_t oh, std::int64_t ow, std::int64_t k) {
  return double(k * k) * double(in) * double(out) * double(oh) * double(ow);
}

std::int64_t count_params(const IANConfig& cfg) {
  cfg.validate();
  const auto c = cfg.channels;
  std::int64_t n = 0;
  if (cfg.use_dgge) n += conv_params(cfg.guidance_channels(), c) + conv_params(c, c) + (kDggeStages - 1) * 2 * conv_params(c, c);
  for (int l = 0; l < cfg.levels; ++l) {
    const std::int64_t in = l == cfg.levels - 1 ? 3 : 6;
    n += conv_params(in, c) + 5 * conv_params(c, c);
    n += cfg.blocks * iarb_param_count(cfg.block_spec());
    n += 9 * conv_params(c, c) + conv_params(c, 3);
  }
  if (cfg.use_light_projector) n += projector_param_count(cfg.projector_spec());
  return n;
}

MacsReport estimate_macs(const IANConfig& cfg, std::int64_t h, std::int64_t w) {
  cfg.validate();
  const auto m = cfg.spatial_multiple();
  check(h > 0 && w > 0 && h % m == 0 && w % m == 0,
        "estimate_macs: extents must be multiples of " + std::to_string(m));
  const auto c = cfg.channels;
  MacsReport r;
  auto& mods = r.modules;
  for (const char* k : {"dgge", "encoder", "bottleneck", "decoder", "head"}) mods[k] = 0;
  if (cfg.use_dgge) {
    mods["dgge"] += conv_macs(cfg.guidance_channels(), c, h, w) + conv_macs(c, c, h, w);
    for (int k = 1; k < kDggeStages; ++k) {
      const auto sh = (h + (1 << k) - 1) >> k, sw = (w + (1 << k) - 1) >> k;
      mods["dgge"] += 2 * conv_macs(c, c, sh, sw);
    }
  }
  const auto spec = cfg.block_spec();
  const auto d = spec.descriptor_dim();
  for (int l = 0; l < cfg.levels; ++l) {
    const auto hl = h >> l, wl = w >> l;
    const std::int64_t in = l == cfg.levels - 1 ? 3 : 6;
    mods["encoder"] += conv_macs(in, c, hl, wl) + conv_macs(c, c, hl, wl) + 2 * conv_macs(c, c, hl / 2, wl / 2) +
                       2 * conv_macs(c, c, hl / 4, wl / 4);
    const auto bh = hl / 4, bw = wl / 4;
    double block = 0;
    if (cfg.block == BlockVariant::vanilla) {
      block = 2 * conv_macs(c, c, bh, bw);
    } else {
      block = 3 * conv_macs(c, spec.branch_channels, bh, bw) + conv_macs(d, c, bh, bw);
      const double lin = double(d + spec.light_dim) * double(d);
      if (cfg.block == BlockVariant::full || cfg.block == BlockVariant::wo_dilated) block += 2 * lin;
      if (cfg.block == BlockVariant::mean_att || cfg.block == BlockVariant::std_att) block += lin;
    }
    mods["bottleneck"] += cfg.blocks * block;
    mods["decoder"] += 3 * (conv_macs(c, c, bh, bw) + conv_macs(c, c, hl / 2, wl / 2) + conv_macs(c, c, hl, wl));
    mods["head"] += conv_macs(c, 3, hl, wl);

    // Resampling: input pyramid, upsampled previous output, decoder and CLSC upsamples.
    if (l > 0) r.resampling += resample_macs(Filter::bicubic, 3, h, w, hl, wl);
    if (l < cfg.levels - 1) r.resampling += resample_macs(Filter::bicubic, 3, hl / 2, wl / 2, hl, wl);
    r.resampling += resample_macs(Filter::bilinear, c, bh, bw, hl / 2, wl / 2) +
                    resample_macs(Filter::bilinear, c, hl / 2, wl / 2, hl, wl);
    if (cfg.use_clsc && l < cfg.levels - 1)
      r.resampling += resample_macs(Filter::bilinear, c, bh / 2, bw / 2, bh, bw) +
                      resample_macs(Filter::bilinear, c, hl / 4, wl / 4, hl / 2, wl / 2) +
                      resample_macs(Filter::bilinear, c, hl / 2, wl / 2, hl, wl);
  }
  if (cfg.use_light_projector) {
    const auto p = cfg.projector_spec();
    mods["projector"] = double(p.sh_dim) * double(p.hidden) + double(p.hidden) * double(p.hidden) +
                        double(p.hidden) * double(p.blocks * p.embed_dim);
  }
  for (const auto& [k, v] : mods) r.total += v;
  return r;
}

// ---------------------------------------------------------------------------
// Checkpoints

Checkpoint make_checkpoint(const Model& model, const AdamState<float>& adam, const LossWeights& loss,
                           std::int64_t iteration, const std::string& rng_state) {
  Checkpoint c;
  c.config = model.config();
  c.loss = loss;
  for (const auto& [name, t] : model.named_parameters()) c.params.emplace_back(name, t.detach());
  c.adam = adam;
  c.iteration = iteration;
  c.rng_state = rng_state;
  return c;
}

namespace {
void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}
void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& s, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(s, u);
}
std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
float get_f32(const unsigned char* p) {
  const std::uint32_t u = get_u32(p);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}
}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  std::string blob;
  json arrays = json::array();
  auto add = [&](const std::string& name, const Shape& shape, std::span<const float> data) {
    arrays.push_back({{"name", name}, {"dtype", "f32"}, {"shape", shape}, {"offset", blob.size()}});
    for (float v : data) put_f32(blob, v);
  };
  for (const auto& [name, t] : ckpt.params) add(name, t.shape(), t.data());
  const bool moments = !ckpt.adam.m.empty();
  check(!moments || ckpt.adam.m.size() == ckpt.params.size(), "save_checkpoint: optimizer state size mismatch");
  if (moments)
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      add("adam.m/" + ckpt.params[i].first, ckpt.params[i].second.shape(), ckpt.adam.m[i]);
      add("adam.v/" + ckpt.params[i].first, ckpt.params[i].second.shape(), ckpt.adam.v[i]);
    }
  const json header = {{"config", to_json(ckpt.config)},
                       {"loss", to_json(ckpt.loss)},
                       {"iteration", ckpt.iteration},
                       {"rng_state", ckpt.rng_state},
                       {"adam",
                        {{"lr", ckpt.adam.lr},
                         {"beta1", ckpt.adam.beta1},
                         {"beta2", ckpt.adam.beta2},
                         {"eps", ckpt.adam.eps},
                         {"step", ckpt.adam.step},
                         {"moments", moments}}},
                       {"arrays", arrays},
                       {"data_bytes", blob.size()}};
  const std::string hs = header.dump();
  std::string out(kCheckpointMagic, 7);
  put_u16(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(hs.size()));
  out += hs;
  out += blob;
  std::ofstream f(path, std::ios::binary);
  check(f.good(), "save_checkpoint: cannot write '" + path.string() + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  check(f.good(), "save_checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "load_checkpoint: cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = "load_checkpoint '" + path.string() + "': ";
  check(bytes.size() >= 13 && std::memcmp(p, kCheckpointMagic, 7) == 0, where + "bad magic (not a checkpoint)");
  const std::uint16_t version = std::uint16_t(p[7] | (p[8] << 8));
  check(version == kCheckpointVersion, where + "unsupported version " + std::to_string(version));
  const std::uint32_t hlen = get_u32(p + 9);
  check(bytes.size() >= 13 + std::size_t(hlen), where + "truncated header");
  json h;
  try {
    h = json::parse(bytes.substr(13, hlen));
  } catch (const json::exception& e) {
    throw Error(where + "corrupt header: " + e.what());
  }
  const std::size_t base = 13 + hlen;
  Checkpoint c;
  try {
    c.config = ian_config_from_json(h.at("config"));
    c.loss = loss_weights_from_json(h.at("loss"));
    c.iteration = h.at("iteration").get<std::int64_t>();
    c.rng_state = h.at("rng_state").get<std::string>();
    const auto& a = h.at("adam");
    c.adam.lr = a.at("lr").get<double>();
    c.adam.beta1 = a.at("beta1").get<double>();
    c.adam.beta2 = a.at("beta2").get<double>();
    c.adam.eps = a.at("eps").get<double>();
    c.adam.step = a.at("step").get<std::int64_t>();
    check(bytes.size() == base + h.at("data_bytes").get<std::size_t>(), where + "truncated or oversized data");
    for (const auto& e : h.at("arrays")) {
      const auto name = e.at("name").get<std::string>();
      check(e.at("dtype").get<std::string>() == "f32", where + "unsupported dtype for '" + name + "'");
      const Shape shape = e.at("shape").get<Shape>();
      const auto off = e.at("offset").get<std::size_t>();
      const auto n = static_cast<std::size_t>(shape_numel(shape));
      check(base + off + 4 * n <= bytes.size(), where + "array '" + name + "' runs past end of file");
      std::vector<float> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = get_f32(p + base + off + 4 * i);
      if (name.rfind("adam.m/", 0) == 0)
        c.adam.m.push_back(std::move(v));
      else if (name.rfind("adam.v/", 0) == 0)
        c.adam.v.push_back(std::move(v));
      else
        c.params.emplace_back(name, Tensor(shape, std::move(v)));
    }
  } catch (const json::exception& e) {
    throw Error(where + "corrupt header: " + e.what());
  }
  check(c.adam.m.size() == c.adam.v.size() && (c.adam.m.empty() || c.adam.m.size() == c.params.size()),
        where + "optimizer state does not match parameters");
  return c;
}

void restore_parameters(Model& model, const Checkpoint& ckpt) {
  auto named = model.named_parameters();
  std::set<std::string> want, have;
  for (const auto& [n, t] : named) want.insert(n);
  for (const auto& [n, t] : ckpt.params) have.insert(n);
  if (want != have) {
    std::string msg = "checkpoint parameters do not match the model configuration";
    for (const auto& n : want)
      if (!have.count(n)) {
        msg += "; missing '" + n + "'";
        break;
      }
    for (const auto& n : have)
      if (!want.count(n)) {
        msg += "; unexpected '" + n + "'";
        break;
      }
    throw Error(msg);
  }
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [n, t] : ckpt.params) by_name[n] = &t;
  for (auto& [n, t] : named) {
    const Tensor& src = *by_name.at(n);
    check(src.shape() == t.shape(), "checkpoint array '" + n + "' has shape " + shape_str(src.shape()) +
                                        ", model expects " + shape_str(t.shape()));
    auto dst = t.mutable_data();
    std::copy(src.data().begin(), src.data().end(), dst.begin());
  }
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model m(ckpt.config, 0);
  restore_parameters(m, ckpt);
  return m;
}

// ---------------------------------------------------------------------------
// Training

void check_compatible(const IANConfig& cfg, const Dataset& data) {
  check(!data.empty(), "dataset is empty");
  const auto mult = cfg.spatial_multiple();
  check(data.height() % mult == 0 && data.width() % mult == 0,
        "dataset images are " + std::to_string(data.height()) + "x" + std::to_string(data.width()) + "; " +
            std::to_string(cfg.levels) + " levels need multiples of " + std::to_string(mult));
  if (cfg.use_dgge) check(data.has_depth(), "configuration enables DGGE but the dataset has no depth maps");
  if (cfg.use_light_projector)
    check(data.has_lights(), "configuration enables the light projector but the dataset has no light metadata");
}

Tensor downsample_target(const Tensor& target, int level) {
  NoGradGuard ng;
  return resize_bicubic(target, 1.0 / double(std::int64_t{1} << level));
}

namespace {
constexpr std::uint64_t kStreamSalt = 0x9E3779B97F4A7C15ull;

AdamState<float> fresh_adam(double lr) {
  AdamState<float> a;
  a.lr = lr;
  return a;
}
}  // namespace

Trainer::Trainer(const RunConfig& cfg, const Dataset& train)
    : cfg_(cfg),
      data_(&train),
      model_(cfg.model, cfg.run.seed),
      adam_(fresh_adam(cfg.run.lr)),
      stream_(train, static_cast<std::size_t>(cfg.run.batch_size), cfg.run.seed ^ kStreamSalt, cfg.run.augment) {
  cfg_.validate();
  check_compatible(cfg_.model, train);
}

Trainer::Trainer(const RunConfig& cfg, const Dataset& train, const Checkpoint& resume) : Trainer(cfg, train) {
  check(resume.config == cfg_.model, "resume: checkpoint model configuration differs from the run configuration");
  restore_parameters(model_, resume);
  adam_ = resume.adam;
  adam_.lr = cfg_.run.lr;
  iteration_ = resume.iteration;
  if (!resume.rng_state.empty()) stream_.rng().set_state(resume.rng_state);
}

double Trainer::step() {
  const Batch b = stream_.next();
  const auto outputs = model_.forward(b.input, cfg_.model.use_dgge ? &b.depth : nullptr,
                                      cfg_.model.use_light_projector ? &b.light_out : nullptr);
  std::vector<Tensor> gts;
  for (int l = 0; l < cfg_.model.levels; ++l) gts.push_back(downsample_target(b.target, l));
  const auto loss = total_loss(outputs, gts, cfg_.loss);
  model_.zero_grad();
  loss.backward();
  auto params = model_.parameters();
  adam_step(params, adam_);
  ++iteration_;
  return static_cast<double>(loss.item());
}

TrainReport Trainer::run(const Dataset* eval, const std::function<void(const IntervalLog&)>& on_log) {
  TrainReport rep;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  double acc = 0;
  int n = 0;
  while (iteration_ < cfg_.run.iterations) {
    acc += step();
    ++n;
    if (iteration_ % cfg_.run.log_interval == 0 || iteration_ == cfg_.run.iterations) {
      IntervalLog l{iteration_, acc / n, elapsed()};
      rep.intervals.push_back(l);
      if (on_log) on_log(l);
      acc = 0;
      n = 0;
    }
    if (eval && cfg_.run.eval_interval > 0 && iteration_ % cfg_.run.eval_interval == 0 &&
        iteration_ != cfg_.run.iterations)
      rep.evals.emplace_back(iteration_, evaluate(model_, *eval, cfg_.run.batch_size));
  }
  if (eval) rep.evals.emplace_back(iteration_, evaluate(model_, *eval, cfg_.run.batch_size));
  rep.iterations = iteration_;
  rep.seconds = elapsed();
  return rep;
}

Checkpoint Trainer::checkpoint() const {
  return make_checkpoint(model_, adam_, cfg_.loss, iteration_, stream_.rng().state());
}

std::vector<Tensor> infer_dataset(const Model& model, const Dataset& data, int batch_size,
                                  const std::optional<SHLight>& light_override) {
  check_compatible(model.config(), data);
  check(batch_size >= 1, "infer: batch size must be positive");
  NoGradGuard ng;
  std::vector<Tensor> out;
  for (std::size_t s = 0; s < data.size(); s += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = s; i < std::min(data.size(), s + static_cast<std::size_t>(batch_size)); ++i) idx.push_back(i);
    Batch b = make_batch(data, idx);
    if (light_override) {
      std::vector<float> l;
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (double c : light_override->c) l.push_back(static_cast<float>(c));
      b.light_out = Tensor({static_cast<std::int64_t>(idx.size()), kShCoeffs}, std::move(l));
    }
    const auto& cfg = model.config();
    const auto y = model.forward(b.input, cfg.use_dgge ? &b.depth : nullptr,
                                 cfg.use_light_projector ? &b.light_out : nullptr)[0];
    for (std::size_t k = 0; k < idx.size(); ++k) out.push_back(clamp01(narrow(y, 0, static_cast<std::int64_t>(k), 1)));
  }
  return out;
}

EvalResult evaluate(const Model& model, const Dataset& data, int batch_size) {
  const auto outs = infer_dataset(model, data, batch_size);
  EvalResult r;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& p = data[i];
    const Shape s4{1, 3, p.input.dim(1), p.input.dim(2)};
    const Tensor in = reshape(p.input, s4), gt = reshape(p.target, s4);
    ImageMetrics m;
    m.name = p.name;
    m.psnr = psnr(outs[i], gt);
    m.ssim_rgb = ssim_rgb(outs[i], gt);
    m.ssim_luma = ssim_luma(outs[i], gt);
    m.copy_psnr = psnr(in, gt);
    m.copy_ssim_rgb = ssim_rgb(in, gt);
    m.copy_ssim_luma = ssim_luma(in, gt);
    r.images.push_back(m);
  }
  const double n = double(r.images.size());
  for (const auto& m : r.images) {
    r.psnr += m.psnr / n;
    r.ssim_rgb += m.ssim_rgb / n;
    r.ssim_luma += m.ssim_luma / n;
    r.copy_psnr += m.copy_psnr / n;
    r.copy_ssim_rgb += m.copy_ssim_rgb / n;
    r.copy_ssim_luma += m.copy_ssim_luma / n;
  }
  return r;
}

namespace {
// JSON has no infinity; identical images report the string "inf".
json db(double v) { return std::isinf(v) ? json("inf") : json(v); }
}  // namespace

json to_json(const IntervalLog& l) { return {{"iteration", l.iteration}, {"loss", l.loss}, {"seconds", l.seconds}}; }

json to_json(const EvalResult& r, bool per_image) {
  json j = {{"psnr", db(r.psnr)},           {"ssim_rgb", r.ssim_rgb},         {"ssim_luma", r.ssim_luma},
            {"copy_psnr", db(r.copy_psnr)}, {"copy_ssim_rgb", r.copy_ssim_rgb}, {"copy_ssim_luma", r.copy_ssim_luma},
            {"count", r.images.size()}};
  if (per_image) {
    json imgs = json::array();
    for (const auto& m : r.images)
      imgs.push_back({{"name", m.name},
                      {"psnr", db(m.psnr)},
                      {"ssim_rgb", m.ssim_rgb},
                      {"ssim_luma", m.ssim_luma},
                      {"copy_psnr", db(m.copy_psnr)},
                      {"copy_ssim_rgb", m.copy_ssim_rgb},
                      {"copy_ssim_luma", m.copy_ssim_luma}});
    j["images"] = imgs;
  }
  return j;
}

}  // namespace ian
