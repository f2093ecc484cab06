#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "ian/trainer.hpp"

using namespace ian;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(IAN_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

IANConfig cfg_of(int levels, int blocks, std::int64_t ch) {
  IANConfig c;
  c.levels = levels;
  c.blocks = blocks;
  c.channels = ch;
  return c;
}

Dataset tiny_data(int count, std::int64_t size, LightPolicy policy = LightPolicy::fixed_pair, std::uint64_t seed = 9) {
  DatasetSpec s;
  s.count = count;
  s.size = size;
  s.seed = seed;
  s.policy = policy;
  Rng rng(seed);
  std::vector<ScenePair> pairs;
  for (int i = 0; i < count; ++i) pairs.push_back(synth_pair(s, rng, i));
  return Dataset::from_pairs(pairs);
}

RunConfig tiny_run(int iterations, std::int64_t ch = 4) {
  RunConfig r;
  r.model = cfg_of(3, 1, ch);
  r.model.image_size = 32;
  r.run.iterations = iterations;
  r.run.batch_size = 2;
  r.run.log_interval = 5;
  r.run.lr = 1e-3;
  return r;
}

bool same_params(const Model& a, const Model& b) {
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i].first != pb[i].first || pa[i].second.shape() != pb[i].second.shape() ||
        std::memcmp(pa[i].second.data().data(), pb[i].second.data().data(), pa[i].second.numel() * sizeof(float)) != 0)
      return false;
  return true;
}

}  // namespace

TEST_CASE("parameter count equals the instantiated model") {
  for (int l = 1; l <= 4; ++l)
    for (int n : {1, 3})
      for (bool dg : {false, true}) {
        auto c = cfg_of(l, n, 5);
        c.use_dgge = dg;
        c.image_size = 64;
        CHECK(count_params(c) == Model(c, 1).parameter_count());
      }
  auto c = cfg_of(2, 2, 5);
  c.image_size = 64;
  c.use_light_projector = true;
  c.projector_hidden = 12;
  c.light_embed_dim = 7;
  CHECK(count_params(c) == Model(c, 1).parameter_count());
  c.block = BlockVariant::mean_att;
  CHECK(count_params(c) == Model(c, 1).parameter_count());
}

TEST_CASE("single-channel configuration matches a manual tally") {
  auto c = cfg_of(1, 1, 1);
  c.image_size = 64;
  // Geometry encoder: 6->1 (55) + 1->1 (10), then four stages of two 1->1 convs (80).
  const int dgge = 55 + 10 + 4 * 20;
  // Encoder: 3->1 (28) + five 1->1 (50). Decoder: nine 1->1 (90). Head 1->3 (30).
  // Block: branches 3x10, two 3->3 linears 2x12, 3->1 fusion 28.
  const int level = 78 + (30 + 24 + 28) + 90 + 30;
  CHECK(count_params(c) == dgge + level);
  CHECK(dgge + level == 425);
}

TEST_CASE("default accounting and structural increments") {
  const IANConfig d{};
  const auto n = count_params(d);
  CHECK(n >= 2'140'000);
  CHECK(n <= 3'200'000);
  const auto lvl = [](int l) { return count_params(cfg_of(l, 4, 48)); };
  const double i2 = lvl(2) - lvl(1), i3 = lvl(3) - lvl(2), i4 = lvl(4) - lvl(3);
  CHECK(std::abs(i3 - i2) / i2 < 0.01);
  CHECK(std::abs(i4 - i3) / i3 < 0.01);
  const auto blk = [](int b) { return count_params(cfg_of(3, b, 48)); };
  for (int b = 2; b < 6; ++b) CHECK(blk(b + 1) - blk(b) == blk(2) - blk(1));
}

TEST_CASE("mac accounting") {
  CHECK(conv_macs(48, 48, 256, 256) == doctest::Approx(20736.0 * 65536.0));
  CHECK(conv_macs(48, 48, 256, 256) / 1e9 == doctest::Approx(1.359).epsilon(1e-3));
  const IANConfig d{};
  const auto full = estimate_macs(d, 1024, 1024);
  CHECK(full.total >= 204.8e9);
  CHECK(full.total <= 307.2e9);
  double sum = 0;
  for (const auto& [k, v] : full.modules) sum += v;
  CHECK(sum == full.total);
  CHECK(full.resampling > 0);
  const auto half = estimate_macs(d, 512, 512);
  CHECK(full.total / half.total == doctest::Approx(4.0).epsilon(0.01));
  // Monotone in size, levels and blocks.
  CHECK(estimate_macs(d, 1024, 512).total < full.total);
  const double m1 = estimate_macs(cfg_of(1, 4, 48), 1024, 1024).total, m2 = estimate_macs(cfg_of(2, 4, 48), 1024, 1024).total,
               m3 = estimate_macs(cfg_of(3, 4, 48), 1024, 1024).total;
  CHECK(m1 < m2);
  CHECK(m2 < m3);
  CHECK(m3 - m2 < m2 - m1);
  CHECK(estimate_macs(cfg_of(3, 5, 48), 1024, 1024).total > m3);
  CHECK_THROWS_AS(estimate_macs(d, 1000, 1000), Error);
}

TEST_CASE("checkpoint round trip and error handling") {
  const auto dir = scratch("ckpt");
  auto c = cfg_of(2, 1, 4);
  c.image_size = 32;
  const Model m(c, 5);
  AdamState<float> adam;
  adam.step = 3;
  for (const auto& t : m.parameters()) {
    adam.m.emplace_back(t.numel(), 0.25f);
    adam.v.emplace_back(t.numel(), 0.5f);
  }
  const auto path = dir / "m.ianckpt";
  save_checkpoint(make_checkpoint(m, adam, LossWeights::gradient_preset(), 17, "abc"), path);
  const auto ck = load_checkpoint(path);
  CHECK(ck.config == c);
  CHECK(ck.loss == LossWeights::gradient_preset());
  CHECK(ck.iteration == 17);
  CHECK(ck.rng_state == "abc");
  CHECK(ck.adam.step == 3);
  CHECK(ck.adam.m == adam.m);
  CHECK(ck.adam.v == adam.v);
  const auto m2 = model_from_checkpoint(ck);
  CHECK(same_params(m, m2));

  Rng rng(1);
  std::vector<float> xv(1 * 3 * 32 * 32), dv(32 * 32);
  for (auto& e : xv) e = float(rng.uniform());
  for (auto& e : dv) e = float(rng.uniform());
  const Tensor x({1, 3, 32, 32}, xv), d({1, 1, 32, 32}, dv);
  const auto o1 = m.forward(x, &d), o2 = m2.forward(x, &d);
  for (std::size_t l = 0; l < o1.size(); ++l)
    CHECK(std::memcmp(o1[l].data().data(), o2[l].data().data(), o1[l].numel() * sizeof(float)) == 0);

  std::ifstream f(path, std::ios::binary);
  const std::string bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream o(dir / name, std::ios::binary);
    o << content;
    return dir / name;
  };
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(load_checkpoint(write("magic.ianckpt", bad_magic)), Error);
  std::string bad_version = bytes;
  bad_version[7] = 9;
  CHECK_THROWS_AS(load_checkpoint(write("version.ianckpt", bad_version)), Error);
  CHECK_THROWS_AS(load_checkpoint(write("short.ianckpt", bytes.substr(0, bytes.size() - 10))), Error);
  CHECK_THROWS_AS(load_checkpoint(write("header.ianckpt", bytes.substr(0, 20))), Error);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ianckpt"), Error);

  // A checkpoint without the geometry encoder cannot fill a model that has one.
  auto nodg = c;
  nodg.use_dgge = false;
  const Model plain(nodg, 5);
  const auto ck2 = make_checkpoint(plain, {}, {}, 0, "");
  Model target(c, 5);
  CHECK_THROWS_WITH_AS(restore_parameters(target, ck2), doctest::Contains("missing 'dgge"), Error);
  auto wider = c;
  wider.channels = 5;
  Model w(wider, 5);
  CHECK_THROWS_AS(restore_parameters(w, ck), Error);
}

TEST_CASE("zero iterations leave the initialisation untouched") {
  const auto data = tiny_data(4, 32);
  auto cfg = tiny_run(0);
  Trainer t(cfg, data);
  const auto rep = t.run();
  CHECK(rep.iterations == 0);
  CHECK(rep.intervals.empty());
  const Model init(cfg.model, cfg.run.seed);
  CHECK(same_params(model_from_checkpoint(t.checkpoint()), init));
}

TEST_CASE("short training lowers the loss") {
  const auto data = tiny_data(10, 32);
  auto cfg = tiny_run(50, 8);
  cfg.run.log_interval = 10;
  Trainer t(cfg, data);
  const auto rep = t.run();
  REQUIRE(rep.intervals.size() == 5);
  for (std::size_t i = 1; i < rep.intervals.size(); ++i)
    CHECK(rep.intervals[i].iteration > rep.intervals[i - 1].iteration);
  CHECK(rep.intervals.back().loss < rep.intervals.front().loss);
}

TEST_CASE("training is deterministic under a seed") {
  const auto data = tiny_data(6, 32);
  auto cfg = tiny_run(4);
  cfg.run.augment = true;
  Trainer a(cfg, data), b(cfg, data);
  a.run();
  b.run();
  CHECK(same_params(a.model(), b.model()));
  cfg.run.seed = 2;
  Trainer c(cfg, data);
  c.run();
  CHECK_FALSE(same_params(a.model(), c.model()));
}

TEST_CASE("resuming at an epoch boundary continues the same run") {
  const auto data = tiny_data(4, 32);
  auto cfg = tiny_run(4);
  Trainer full(cfg, data);
  full.run();
  auto half = cfg;
  half.run.iterations = 2;  // two batches of two: one full epoch
  Trainer first(half, data);
  first.run();
  Trainer second(cfg, data, first.checkpoint());
  second.run();
  CHECK(second.iteration() == 4);
  CHECK(same_params(full.model(), second.model()));
  auto other = cfg;
  other.model.channels = 5;
  CHECK_THROWS_AS(Trainer(other, data, first.checkpoint()), Error);
}

TEST_CASE("configuration and dataset must agree before training") {
  const auto data = tiny_data(3, 32);
  std::vector<ScenePair> nodepth(data.pairs());
  for (auto& p : nodepth) p.depth = Tensor();
  auto cfg = tiny_run(1);
  CHECK_THROWS_AS(Trainer(cfg, Dataset::from_pairs(nodepth)), Error);
  cfg.model.use_dgge = false;
  CHECK_NOTHROW(Trainer(cfg, Dataset::from_pairs(nodepth)));
  std::vector<ScenePair> nolight(data.pairs());
  for (auto& p : nolight) p.light_out.reset(), p.light_in.reset();
  cfg = tiny_run(1);
  cfg.model.use_light_projector = true;
  cfg.model.projector_hidden = 8;
  cfg.model.light_embed_dim = 4;
  CHECK_THROWS_AS(Trainer(cfg, Dataset::from_pairs(nolight)), Error);
  cfg = tiny_run(1);
  cfg.model.levels = 4;  // needs multiples of 32
  CHECK_NOTHROW(check_compatible(cfg.model, data));
  const auto small = tiny_data(2, 16);
  CHECK_THROWS_AS(check_compatible(cfg.model, small), Error);
}

TEST_CASE("evaluation of the identity task and determinism") {
  auto pairs = tiny_data(3, 32).pairs();
  for (auto& p : pairs) p.target = p.input;
  const auto ds = Dataset::from_pairs(pairs);
  auto c = cfg_of(2, 1, 4);
  c.image_size = 32;
  Model m(c, 1);
  for (auto& lw : m.levels()) {
    for (auto& v : lw.head.kernel.mutable_data()) v = 0;
    for (auto& v : lw.head.bias.mutable_data()) v = 0;
  }
  const auto r = evaluate(m, ds);
  CHECK(std::isinf(r.psnr));
  CHECK(std::isinf(r.copy_psnr));
  CHECK(r.ssim_rgb == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.copy_ssim_luma == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(to_json(r).at("psnr") == "inf");
  const auto data = tiny_data(3, 32);
  const Model m2(c, 2);
  const auto a = evaluate(m2, data), b = evaluate(m2, data);
  CHECK(a.psnr == b.psnr);
  CHECK(a.images.size() == 3);
  CHECK(to_json(a, true).at("images").size() == 3);
}

TEST_CASE("target pyramid uses the input resampler") {
  const auto data = tiny_data(1, 32);
  const auto t = reshape(data[0].target, {1, 3, 32, 32});
  const auto d = downsample_target(t, 2);
  CHECK(d.shape() == Shape{1, 3, 8, 8});
  const auto ref = resize_bicubic(t, 0.25);
  CHECK(std::equal(d.data().begin(), d.data().end(), ref.data().begin()));
}
