#include "ian/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ian/config.hpp"
#include "ian/image_io.hpp"

namespace ian {

namespace fs = std::filesystem;

namespace {

Tensor hflip(const Tensor& t) {
  const auto c = t.dim(0), h = t.dim(1), w = t.dim(2);
  std::vector<float> out(t.numel());
  const auto d = t.data();
  for (std::int64_t k = 0; k < c * h; ++k)
    for (std::int64_t x = 0; x < w; ++x) out[k * w + x] = d[k * w + (w - 1 - x)];
  return Tensor(t.shape(), std::move(out));
}

// Same values a PNG round trip produces.
Tensor quantize(const Tensor& t, double levels) {
  std::vector<float> out(t.numel());
  const auto d = t.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = std::clamp(static_cast<double>(d[i]), 0.0, 1.0);
    out[i] = static_cast<float>(static_cast<double>(std::lround(v * levels)) / levels);
  }
  return Tensor(t.shape(), std::move(out));
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
Vec3 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json light_json(const LightSpec& l) {
  json sh = json::array();
  for (double c : l.sh().c) sh.push_back(c);
  return {{"dir", vec_json(l.dir)},       {"sh9", sh},           {"azimuth", l.azimuth}, {"elevation", l.elevation},
          {"intensity", l.intensity}, {"tint", vec_json(l.tint)}, {"ambient", l.ambient}};
}

LightSpec json_light(const json& j) {
  LightSpec l;
  l.dir = json_vec(j.at("dir"));
  l.azimuth = j.value("azimuth", 0.0);
  l.elevation = j.value("elevation", 90.0);
  l.intensity = j.value("intensity", 1.0);
  l.tint = j.contains("tint") ? json_vec(j.at("tint")) : Vec3{1, 1, 1};
  l.ambient = j.value("ambient", 0.0);
  return l;
}

json scene_json(const SceneDescriptor& s) {
  json spheres = json::array();
  for (const auto& sp : s.spheres)
    spheres.push_back({{"center", vec_json(sp.center)}, {"radius", sp.radius}, {"albedo", vec_json(sp.albedo)}});
  return {{"spheres", spheres},
          {"plane_albedo", vec_json(s.plane_albedo)},
          {"stripe_dir", {s.stripe_dir[0], s.stripe_dir[1]}},
          {"stripe_freq", s.stripe_freq},
          {"stripe_contrast", s.stripe_contrast}};
}

SceneDescriptor json_scene(const json& j) {
  SceneDescriptor s;
  for (const auto& sp : j.at("spheres"))
    s.spheres.push_back({json_vec(sp.at("center")), sp.at("radius").get<double>(), json_vec(sp.at("albedo"))});
  s.plane_albedo = json_vec(j.at("plane_albedo"));
  s.stripe_dir = {j.at("stripe_dir").at(0).get<double>(), j.at("stripe_dir").at(1).get<double>()};
  s.stripe_freq = j.at("stripe_freq").get<double>();
  s.stripe_contrast = j.at("stripe_contrast").get<double>();
  return s;
}

std::string record_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%04d", i);
  return buf;
}

}  // namespace

ScenePair hflip_pair(const ScenePair& p) {
  ScenePair q = p;
  q.input = hflip(p.input);
  q.target = hflip(p.target);
  if (p.depth.defined()) q.depth = hflip(p.depth);
  if (p.light_in) q.light_in = mirror_light(*p.light_in);
  if (p.light_out) q.light_out = mirror_light(*p.light_out);
  if (p.scene) q.scene = mirror_scene(*p.scene);
  return q;
}

std::string to_string(LightPolicy p) { return p == LightPolicy::fixed_pair ? "fixed_pair" : "random_pairs"; }

LightPolicy light_policy_from_string(const std::string& s) {
  if (s == "fixed_pair" || s == "fixed") return LightPolicy::fixed_pair;
  if (s == "random_pairs" || s == "random") return LightPolicy::random_pairs;
  throw Error("unknown light policy '" + s + "' (expected fixed_pair or random_pairs)");
}

void DatasetSpec::validate() const {
  check(count >= 1, "dataset: count must be positive");
  check(size >= 8, "dataset: size must be at least 8");
  check(ranges.min_spheres >= 0 && ranges.max_spheres >= ranges.min_spheres, "dataset: invalid sphere count range");
  check(ranges.min_radius > 0 && ranges.max_radius >= ranges.min_radius, "dataset: invalid radius range");
  check(ranges.min_albedo >= 0 && ranges.max_albedo <= 1 && ranges.max_albedo >= ranges.min_albedo,
        "dataset: invalid albedo range");
  check(ambient >= 0 && intensity > 0, "dataset: ambient must be >= 0 and intensity > 0");
  check(min_elevation <= max_elevation, "dataset: invalid elevation range");
}

std::pair<LightSpec, LightSpec> fixed_light_pair(const DatasetSpec& spec) {
  return {LightSpec::from_angles(0.0, spec.elevation, spec.intensity, tint_for_temperature(4500), spec.ambient),
          LightSpec::from_angles(90.0, spec.elevation, spec.intensity, tint_for_temperature(6500), spec.ambient)};
}

ScenePair synth_pair(const DatasetSpec& spec, Rng& rng, int i) {
  ScenePair p;
  p.name = record_name(i);
  p.scene = random_scene(rng, spec.ranges);
  if (spec.policy == LightPolicy::fixed_pair) {
    std::tie(p.light_in, p.light_out) = fixed_light_pair(spec);
  } else {
    const Vec3 white{1, 1, 1};
    const double a_in = rng.uniform(0.0, 360.0), e_in = rng.uniform(spec.min_elevation, spec.max_elevation);
    const double a_out = rng.uniform(0.0, 360.0), e_out = rng.uniform(spec.min_elevation, spec.max_elevation);
    p.light_in = LightSpec::from_angles(a_in, e_in, spec.intensity, white, spec.ambient);
    p.light_out = LightSpec::from_angles(a_out, e_out, spec.intensity, white, spec.ambient);
  }
  const auto in = render_lambertian(*p.scene, *p.light_in, spec.size);
  const auto out = render_lambertian(*p.scene, *p.light_out, spec.size);
  p.input = quantize(in.image, 255.0);
  p.target = quantize(out.image, 255.0);
  std::vector<float> d(in.depth.data().begin(), in.depth.data().end());
  for (auto& v : d) v = static_cast<float>(v / kCameraZ);
  p.depth = quantize(Tensor(in.depth.shape(), std::move(d)), 65535.0);
  return p;
}

void gen_dataset(const DatasetSpec& spec, const fs::path& dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  check(!ec && fs::is_directory(dir), "gen_dataset: cannot create directory '" + dir.string() + "'");
  Rng rng(spec.seed);
  json records = json::array();
  for (int i = 0; i < spec.count; ++i) {
    const auto p = synth_pair(spec, rng, i);
    save_image(p.input, dir / (p.name + "_in.png"));
    save_image(p.target, dir / (p.name + "_gt.png"));
    save_gray16(p.depth, dir / (p.name + "_depth.png"));
    records.push_back({{"name", p.name},
                       {"input", p.name + "_in.png"},
                       {"target", p.name + "_gt.png"},
                       {"depth", p.name + "_depth.png"},
                       {"light_in", light_json(*p.light_in)},
                       {"light_out", light_json(*p.light_out)},
                       {"scene", scene_json(*p.scene)}});
  }
  json manifest = {{"schema_version", kManifestVersion},
                   {"seed", spec.seed},
                   {"sh_order", kShOrder},
                   {"depth_encoding", "16-bit, value = camera distance / 2"},
                   {"spec", to_json(spec)},
                   {"records", records}};
  std::ofstream f(dir / "manifest.json", std::ios::binary);
  check(f.good(), "gen_dataset: cannot write manifest in '" + dir.string() + "'");
  f << manifest.dump(1) << '\n';
  check(f.good(), "gen_dataset: failed writing manifest");
}

// ---------------------------------------------------------------------------

Dataset Dataset::load(const fs::path& dir) {
  const auto mpath = dir / "manifest.json";
  std::ifstream f(mpath);
  check(f.good(), "dataset: no manifest.json in '" + dir.string() + "'");
  json m;
  try {
    m = json::parse(f);
  } catch (const json::exception& e) {
    throw Error("dataset: malformed manifest '" + mpath.string() + "': " + e.what());
  }
  check(m.value("schema_version", -1) == kManifestVersion,
        "dataset: unsupported manifest schema_version in '" + mpath.string() + "'");
  Dataset d;
  try {
    if (m.contains("spec")) d.spec_ = dataset_spec_from_json(m.at("spec"));
    for (const auto& r : m.at("records")) {
      ScenePair p;
      p.name = r.value("name", r.at("input").get<std::string>());
      p.input = load_image(dir / r.at("input").get<std::string>());
      p.target = load_image(dir / r.at("target").get<std::string>());
      if (r.contains("depth") && !r.at("depth").is_null()) p.depth = load_gray(dir / r.at("depth").get<std::string>());
      if (r.contains("light_in")) p.light_in = json_light(r.at("light_in"));
      if (r.contains("light_out")) p.light_out = json_light(r.at("light_out"));
      if (r.contains("scene")) p.scene = json_scene(r.at("scene"));
      d.pairs_.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw Error("dataset: malformed record in '" + mpath.string() + "': " + e.what());
  }
  check(!d.pairs_.empty(), "dataset: '" + dir.string() + "' has no records");
  for (const auto& p : d.pairs_)
    check(p.input.shape() == d.pairs_[0].input.shape() && p.target.shape() == p.input.shape(),
          "dataset: record '" + p.name + "' has inconsistent image size");
  return d;
}

Dataset Dataset::from_directories(const fs::path& inputs, const fs::path& targets,
                                  const std::optional<fs::path>& depths) {
  check(fs::is_directory(inputs), "dataset: '" + inputs.string() + "' is not a directory");
  check(fs::is_directory(targets), "dataset: '" + targets.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(inputs))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ScenePair> pairs;
  for (const auto& in : files) {
    ScenePair p;
    p.name = in.stem().string();
    p.input = load_image(in);
    const auto tp = targets / in.filename();
    check(fs::exists(tp), "dataset: no target for '" + in.filename().string() + "'");
    p.target = load_image(tp);
    if (depths) {
      const auto dp = *depths / (in.stem().string() + ".png");
      check(fs::exists(dp), "dataset: no depth map for '" + in.filename().string() + "'");
      p.depth = load_gray(dp);
    }
    pairs.push_back(std::move(p));
  }
  return from_pairs(std::move(pairs));
}

Dataset Dataset::from_pairs(std::vector<ScenePair> pairs) {
  check(!pairs.empty(), "dataset: no pairs");
  Dataset d;
  d.pairs_ = std::move(pairs);
  for (const auto& p : d.pairs_) {
    check(p.input.rank() == 3 && p.input.dim(0) == 3 && p.target.shape() == p.input.shape() &&
              p.input.shape() == d.pairs_[0].input.shape(),
          "dataset: pair '" + p.name + "' has inconsistent image shape");
    check(!p.depth.defined() || (p.depth.dim(1) == p.input.dim(1) && p.depth.dim(2) == p.input.dim(2)),
          "dataset: pair '" + p.name + "' depth size differs from its image");
  }
  return d;
}

bool Dataset::has_depth() const {
  return !pairs_.empty() && std::all_of(pairs_.begin(), pairs_.end(), [](const ScenePair& p) { return p.depth.defined(); });
}

bool Dataset::has_lights() const {
  return !pairs_.empty() &&
         std::all_of(pairs_.begin(), pairs_.end(), [](const ScenePair& p) { return p.light_in && p.light_out; });
}

// ---------------------------------------------------------------------------

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& idx, const std::vector<bool>& flip) {
  check(!idx.empty(), "make_batch: empty index list");
  check(flip.empty() || flip.size() == idx.size(), "make_batch: flip mask size mismatch");
  const auto b = static_cast<std::int64_t>(idx.size());
  const auto h = data.height(), w = data.width();
  const bool depth = data.has_depth(), lights = data.has_lights();
  std::vector<float> in, gt, dp, li, lo;
  in.reserve(static_cast<std::size_t>(b * 3 * h * w));
  gt.reserve(in.capacity());
  Batch out;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    check(idx[k] < data.size(), "make_batch: index out of range");
    const bool f = !flip.empty() && flip[k];
    const ScenePair p = f ? hflip_pair(data[idx[k]]) : data[idx[k]];
    in.insert(in.end(), p.input.data().begin(), p.input.data().end());
    gt.insert(gt.end(), p.target.data().begin(), p.target.data().end());
    if (depth) dp.insert(dp.end(), p.depth.data().begin(), p.depth.data().end());
    if (lights) {
      for (double c : p.light_in->sh().c) li.push_back(static_cast<float>(c));
      for (double c : p.light_out->sh().c) lo.push_back(static_cast<float>(c));
    }
    out.indices.push_back(idx[k]);
    out.flipped.push_back(f);
  }
  out.input = Tensor({b, 3, h, w}, std::move(in));
  out.target = Tensor({b, 3, h, w}, std::move(gt));
  if (depth) out.depth = Tensor({b, 1, h, w}, std::move(dp));
  if (lights) {
    out.light_in = Tensor({b, kShCoeffs}, std::move(li));
    out.light_out = Tensor({b, kShCoeffs}, std::move(lo));
  }
  return out;
}

BatchStream::BatchStream(const Dataset& data, std::size_t batch_size, std::uint64_t seed, bool augment)
    : data_(&data), batch_(batch_size), augment_(augment), rng_(seed) {
  check(!data.empty(), "iterate_batches: empty dataset");
  check(batch_size >= 1, "iterate_batches: batch size must be positive");
}

void BatchStream::reshuffle() {
  order_.resize(data_->size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
  pos_ = 0;
  ++epoch_;
}

Batch BatchStream::next() {
  if (epoch_ < 0 || pos_ >= order_.size()) reshuffle();
  const std::size_t end = std::min(order_.size(), pos_ + batch_);
  std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  std::vector<bool> flip;
  if (augment_)
    for (std::size_t k = 0; k < idx.size(); ++k) flip.push_back(rng_.below(2) == 1);
  pos_ = end;
  return make_batch(*data_, idx, flip);
}

}  // namespace ian
