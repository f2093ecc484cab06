// Acceptance checks, one line per criterion:
//
//   ian_acceptance [--criterion N] [--work DIR] [--cli PATH]
//
// Without --criterion every check runs in order. Exit status is 0 only when
// every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ian/gradcheck.hpp"
#include "ian/trainer.hpp"

using namespace ian;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_work = "acceptance_work";
std::string g_cli;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Desk-scale protocol shared by the training criteria.
constexpr int kTrainPairs = 200;
constexpr int kHeldOutPairs = 20;
constexpr std::int64_t kSize = 64;
constexpr std::uint64_t kTrainSeed = 7;
constexpr std::uint64_t kHeldOutSeed = 1007;

Dataset make_data(const std::string& name, LightPolicy policy, int count, std::uint64_t seed) {
  DatasetSpec s;
  s.count = count;
  s.size = kSize;
  s.seed = seed;
  s.policy = policy;
  const auto dir = g_work / name;
  fs::remove_all(dir);
  gen_dataset(s, dir);
  return Dataset::load(dir);
}

RunConfig desk_config(std::uint64_t seed) {
  RunConfig c;
  c.model.levels = 3;
  c.model.blocks = 2;
  c.model.channels = 16;
  c.model.use_dgge = true;
  c.model.image_size = kSize;
  c.loss = LossWeights{1.0, 0.5, 0.0, {1, 1, 1, 1}};
  c.run.iterations = 2000;
  c.run.batch_size = 5;
  c.run.lr = 1e-4;
  c.run.seed = seed;
  c.run.log_interval = 10;
  return c;
}

struct TrainedRun {
  TrainReport report;
  EvalResult eval;
  Checkpoint ckpt;
};

TrainedRun train_and_eval(const RunConfig& cfg, const Dataset& train, const Dataset& held, const std::string& tag) {
  Trainer t(cfg, train);
  auto rep = t.run(nullptr, [&](const IntervalLog& l) {
    if (l.iteration % 250 == 0)
      std::fprintf(stderr, "  [%s] iteration %lld loss %.4f (%.0f s)\n", tag.c_str(), static_cast<long long>(l.iteration),
                   l.loss, l.seconds);
  });
  TrainedRun r{std::move(rep), evaluate(t.model(), held), t.checkpoint()};
  std::fprintf(stderr, "  [%s] held-out PSNR %.3f dB (copy %.3f dB), %.0f s\n", tag.c_str(), r.eval.psnr,
               r.eval.copy_psnr, r.report.seconds);
  return r;
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckOptions opt;
  opt.h = 1e-3;
  opt.include_network = false;
  const auto results = run_gradcheck_suite(opt, [](const GradcheckResult& r) {
    std::fprintf(stderr, "  %-32s %.3e\n", r.name.c_str(), r.max_rel_error);
  });
  const double secs = seconds_since(t0);
  double worst = 0;
  std::string worst_name;
  bool ok = true;
  for (const auto& r : results) {
    if (r.max_rel_error >= worst) worst = r.max_rel_error, worst_name = r.name;
    ok = ok && r.max_rel_error < 1e-4;
  }
  return {ok && secs < 120, std::to_string(results.size()) + " suites, worst " + fmt("%.2e", worst) + " (" + worst_name +
                                ") < 1e-4, " + fmt("%.1f", secs) + " s < 120 s"};
}

IANConfig cfg(int levels, int blocks) {
  IANConfig c;
  c.levels = levels;
  c.blocks = blocks;
  return c;
}

Outcome parameters() {
  const auto n = count_params(cfg(3, 4));
  bool ok = n >= 2'140'000 && n <= 3'200'000;
  std::ostringstream d;
  d << "count " << n << " in [2.14M, 3.20M]";
  const double i2 = count_params(cfg(2, 4)) - count_params(cfg(1, 4));
  const double i3 = count_params(cfg(3, 4)) - count_params(cfg(2, 4));
  const double i4 = count_params(cfg(4, 4)) - count_params(cfg(3, 4));
  const double lvl_spread = std::max(std::abs(i3 - i2) / i2, std::abs(i4 - i3) / i3);
  ok = ok && lvl_spread < 0.01;
  double blk_spread = 0;
  const double b0 = count_params(cfg(3, 2)) - count_params(cfg(3, 1));
  for (int b = 2; b < 6; ++b) {
    const double inc = count_params(cfg(3, b + 1)) - count_params(cfg(3, b));
    blk_spread = std::max(blk_spread, std::abs(inc - b0) / b0);
  }
  ok = ok && blk_spread < 0.01;
  d << "; level increments " << i2 << "/" << i3 << "/" << i4 << " (spread " << fmt("%.2g", lvl_spread)
    << "); block increment " << b0 << " (spread " << fmt("%.2g", blk_spread) << ")";
  return {ok, d.str()};
}

Outcome macs() {
  const double m1 = estimate_macs(cfg(1, 4), 1024, 1024).total;
  const double m2 = estimate_macs(cfg(2, 4), 1024, 1024).total;
  const double m3 = estimate_macs(cfg(3, 4), 1024, 1024).total;
  const bool ok = m3 >= 204.8e9 && m3 <= 307.2e9 && m1 < m2 && m2 < m3 && (m3 - m2) < (m2 - m1);
  return {ok, "L=1/2/3: " + fmt("%.2f", m1 / 1e9) + " / " + fmt("%.2f", m2 / 1e9) + " / " + fmt("%.2f G", m3 / 1e9) +
                  "; L=3 in [204.8, 307.2] G; increments " + fmt("%.2f", (m2 - m1) / 1e9) + " > " +
                  fmt("%.2f", (m3 - m2) / 1e9)};
}

Outcome identity() {
  Rng rng(4);
  bool ok = true;
  std::string d;
  for (std::int64_t hw : {16, 64}) {
    IANConfig c;
    c.image_size = 64;
    Model m(c, 1);
    for (auto& lw : m.levels()) {
      for (auto& v : lw.head.kernel.mutable_data()) v = 0;
      for (auto& v : lw.head.bias.mutable_data()) v = 0;
    }
    std::vector<float> xv(static_cast<std::size_t>(2 * 3 * hw * hw)), dv(static_cast<std::size_t>(2 * hw * hw));
    for (auto& e : xv) e = static_cast<float>(rng.uniform());
    for (auto& e : dv) e = static_cast<float>(rng.uniform());
    const Tensor x({2, 3, hw, hw}, xv), depth({2, 1, hw, hw}, dv);
    NoGradGuard ng;
    const auto outs = m.forward(x, &depth);
    int exact = 0;
    for (int l = 0; l < c.levels; ++l) {
      const auto ref = l == 0 ? x : resize_bicubic(x, 1.0 / double(1 << l));
      const bool eq = outs[l].shape() == ref.shape() &&
                      std::memcmp(outs[l].data().data(), ref.data().data(), ref.numel() * sizeof(float)) == 0;
      exact += eq;
      ok = ok && eq;
    }
    d += (d.empty() ? "" : "; ") + std::to_string(hw) + "x" + std::to_string(hw) + ": " + std::to_string(exact) +
         "/3 levels bitwise equal";
  }
  return {ok, d};
}

Outcome desk_relighting() {
  const auto train = make_data("c5_train", LightPolicy::fixed_pair, kTrainPairs, kTrainSeed);
  const auto held = make_data("c5_heldout", LightPolicy::fixed_pair, kHeldOutPairs, kHeldOutSeed);
  const auto r = train_and_eval(desk_config(1), train, held, "fixed");
  const double gain = r.eval.psnr - r.eval.copy_psnr;
  const double first = r.report.intervals.front().loss, last = r.report.intervals.back().loss;
  const bool ok = gain >= 2.0 && last < 0.5 * first;
  return {ok, "held-out PSNR " + fmt("%.2f", r.eval.psnr) + " dB vs copy " + fmt("%.2f", r.eval.copy_psnr) + " dB (+" +
                  fmt("%.2f", gain) + " >= 2); loss " + fmt("%.4f", last) + " at 2000 < 0.5 x " + fmt("%.4f", first) +
                  " at 10; " + fmt("%.0f s", r.report.seconds)};
}

Outcome arbitrary_light() {
  const auto train = make_data("c6_train", LightPolicy::random_pairs, kTrainPairs, kTrainSeed);
  const auto held = make_data("c6_heldout", LightPolicy::random_pairs, kHeldOutPairs, kHeldOutSeed);
  auto c = desk_config(1);
  c.model.use_light_projector = true;
  const auto r = train_and_eval(c, train, held, "arbitrary");
  const double gain = r.eval.psnr - r.eval.copy_psnr;

  // Conditioning check: the input's own light should reproduce the input
  // more closely than the same light rotated 90 degrees in azimuth.
  const Model m = model_from_checkpoint(r.ckpt);
  NoGradGuard ng;
  double l1_same = 0, l1_rot = 0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const auto b = make_batch(held, {i});
    const auto& lin = *held[i].light_in;
    const auto rot = LightSpec::from_angles(std::fmod(lin.azimuth + 90.0, 360.0), lin.elevation, lin.intensity,
                                            lin.tint, lin.ambient);
    auto sh_tensor = [](const LightSpec& l) {
      const auto sh = l.sh();
      return Tensor({1, kShCoeffs}, std::vector<float>(sh.c.begin(), sh.c.end()));
    };
    const auto same = sh_tensor(lin), turned = sh_tensor(rot);
    const auto o_same = clamp01(m.forward(b.input, &b.depth, &same)[0]);
    const auto o_rot = clamp01(m.forward(b.input, &b.depth, &turned)[0]);
    l1_same += l1_loss(o_same, b.input).item() / double(held.size());
    l1_rot += l1_loss(o_rot, b.input).item() / double(held.size());
  }
  const bool ok = gain >= 1.5 && l1_same < l1_rot;
  return {ok, "held-out PSNR " + fmt("%.2f", r.eval.psnr) + " dB vs copy " + fmt("%.2f", r.eval.copy_psnr) + " dB (+" +
                  fmt("%.2f", gain) + " >= 1.5); L1 to input with input light " + fmt("%.4f", l1_same) +
                  " < rotated light " + fmt("%.4f", l1_rot)};
}

Outcome ablations() {
  const auto train = make_data("c7_train", LightPolicy::fixed_pair, kTrainPairs, kTrainSeed);
  const auto held = make_data("c7_heldout", LightPolicy::fixed_pair, kHeldOutPairs, kHeldOutSeed);
  std::map<std::string, double> mean;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  for (const std::string variant : {"full", "vanilla", "wo_normal"}) {
    for (auto seed : seeds) {
      auto c = desk_config(seed);
      if (variant == "vanilla") c.model.block = BlockVariant::vanilla;
      if (variant == "wo_normal") c.model.guide_normal = false;
      const auto r = train_and_eval(c, train, held, variant + " seed " + std::to_string(seed));
      mean[variant] += r.eval.psnr / double(seeds.size());
    }
  }
  const bool ok = mean["full"] >= mean["vanilla"] && mean["full"] >= mean["wo_normal"];
  return {ok, "mean held-out PSNR over 3 seeds: full " + fmt("%.3f", mean["full"]) + " dB, vanilla block " +
                  fmt("%.3f", mean["vanilla"]) + " dB, without normals " + fmt("%.3f", mean["wo_normal"]) + " dB"};
}

Outcome metrics() {
  Rng rng(8);
  std::vector<double> v(3 * 32 * 32);
  for (auto& e : v) e = rng.uniform();
  const Tensor64 x({1, 3, 32, 32}, v);
  const double s_xx = ssim(x, x).item();
  const double p = psnr(Tensor64::full({1, 3, 16, 16}, 0.3), Tensor64::full({1, 3, 16, 16}, 0.4));
  const double s_c = ssim(Tensor64::full({1, 1, 16, 16}, 0.2), Tensor64::full({1, 1, 16, 16}, 0.8)).item();
  const double closed = (2 * 0.2 * 0.8 + kSsimC1) / (0.2 * 0.2 + 0.8 * 0.8 + kSsimC1);
  std::vector<double> w(3 * 32 * 32);
  for (auto& e : w) e = rng.uniform();
  const Tensor64 y({1, 3, 32, 32}, w);
  const double g0 = gradient_loss(x, y).item(), g1 = gradient_loss(add_scalar(x, 0.37), y).item();
  const bool ok = std::abs(s_xx - 1) < 1e-9 && std::abs(p - 20) < 1e-6 && std::abs(s_c - closed) < 1e-3 &&
                  std::abs(g0 - g1) <= 1e-12 * std::max(1.0, g0);
  return {ok, "|SSIM(x,x)-1| " + fmt("%.1e", std::abs(s_xx - 1)) + "; PSNR " + fmt("%.9f", p) + " dB; SSIM(0.2,0.8) " +
                  fmt("%.6f", s_c) + " vs " + fmt("%.6f", closed) + "; gradient loss offset change " +
                  fmt("%.1e", std::abs(g0 - g1))};
}

Outcome sh_oracle() {
  Rng rng(9);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const auto d = normalized({rng.normal(), rng.normal(), rng.normal()});
    const auto a = sh_from_direction(d);
    const auto n = sh_numeric_oracle([&](const Vec3& v) { return std::max(0.0, dot(v, d)); }, 20000);
    double s = 0;
    for (int k = 0; k < kShCoeffs; ++k) s += std::pow(a.c[k] - n.c[k], 2);
    worst = std::max(worst, std::sqrt(s / kShCoeffs));
  }
  const auto up = sh_from_direction({0, 0, 1});
  double off = 0;
  for (int k : {1, 3, 4, 5, 7, 8}) off = std::max(off, std::abs(up.c[k]));
  return {worst < 1e-3 && off < 1e-6,
          "worst RMS over 50 directions " + fmt("%.2e", worst) + " < 1e-3; +z max |m!=0| " + fmt("%.1e", off) + " < 1e-6"};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome reproducibility() {
  const auto dir = g_work / "c10";
  fs::remove_all(dir);
  fs::create_directories(dir);
  DatasetSpec s;
  s.count = 20;
  s.size = kSize;
  s.seed = kTrainSeed;
  gen_dataset(s, dir / "data");
  auto c = desk_config(5);
  c.run.iterations = 30;
  c.run.train_data = (dir / "data").string();
  std::string how;
  if (!g_cli.empty()) {
    {
      std::ofstream f(dir / "run.json");
      f << c.to_json().dump(1);
    }
    for (const char* out : {"a.ianckpt", "b.ianckpt"}) {
      const std::string cmd = "\"" + g_cli + "\" train --config \"" + (dir / "run.json").string() + "\" --out \"" +
                              (dir / out).string() + "\" > \"" + (dir / (std::string(out) + ".log")).string() + "\" 2>&1";
      if (std::system(cmd.c_str()) != 0) return {false, "train invocation failed: " + cmd};
    }
    how = "two CLI train runs";
  } else {
    const auto data = Dataset::load(dir / "data");
    for (const char* out : {"a.ianckpt", "b.ianckpt"}) {
      Trainer t(c, data);
      t.run();
      save_checkpoint(t.checkpoint(), dir / out);
    }
    how = "two in-process train runs";
  }
  const auto a = slurp(dir / "a.ianckpt"), b = slurp(dir / "b.ianckpt");
  const bool same_file = !a.empty() && a == b;

  const auto ck = load_checkpoint(dir / "a.ianckpt");
  const Model m1 = model_from_checkpoint(ck);
  save_checkpoint(make_checkpoint(m1, ck.adam, ck.loss, ck.iteration, ck.rng_state), dir / "c.ianckpt");
  const Model m2 = model_from_checkpoint(load_checkpoint(dir / "c.ianckpt"));
  const auto data = Dataset::load(dir / "data");
  const auto batch = make_batch(data, {0, 1, 2});
  NoGradGuard ng;
  const auto o1 = m1.forward(batch.input, &batch.depth), o2 = m2.forward(batch.input, &batch.depth);
  bool same_out = true;
  for (std::size_t l = 0; l < o1.size(); ++l)
    same_out = same_out && std::memcmp(o1[l].data().data(), o2[l].data().data(), o1[l].numel() * sizeof(float)) == 0;
  const bool resaved_same = slurp(dir / "c.ianckpt") == a;
  return {same_file && same_out && resaved_same,
          how + ": checkpoints (" + std::to_string(a.size()) + " bytes) " + (same_file ? "identical" : "DIFFER") +
              "; reload/resave " + (resaved_same ? "identical" : "DIFFERS") + "; forward after round trip " +
              (same_out ? "bitwise equal" : "DIFFERS")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  std::string work = g_work.string();
  app.add_option("--criterion", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--cli", g_cli, "Path of the ian executable (criterion 10)");
  CLI11_PARSE(app, argc, argv);
  g_work = work;
  fs::create_directories(g_work);

  const std::vector<Criterion> all{
      {1, "gradient correctness", gradients},
      {2, "parameter accounting", parameters},
      {3, "MACs accounting", macs},
      {4, "identity with zeroed output layers", identity},
      {5, "desk-scale one-to-one relighting", desk_relighting},
      {6, "arbitrary-light relighting", arbitrary_light},
      {7, "ablation directions", ablations},
      {8, "metric fidelity", metrics},
      {9, "SH oracle agreement", sh_oracle},
      {10, "reproducibility", reproducibility},
  };
  bool all_ok = true;
  for (const auto& c : all) {
    if (only && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all_ok = all_ok && o.pass;
    std::printf("criterion %2d %-36s %s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return all_ok ? 0 : 1;
}
