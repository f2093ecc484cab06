// ian: generate data, train, run and evaluate the relighting network.
//
// Exit status: 0 success, 1 failure, 2 usage error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "ian/gradcheck.hpp"
#include "ian/image_io.hpp"
#include "ian/trainer.hpp"

namespace fs = std::filesystem;
using namespace ian;

namespace {

struct Overrides {
  std::string config;
  std::optional<int> iterations, batch, levels, blocks, log_interval;
  std::optional<std::int64_t> channels;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data, eval_data, out, report, block, resume;
  std::optional<bool> dgge, projector, augment;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run configuration JSON");
  cmd->add_option("--iterations", o.iterations);
  cmd->add_option("--batch", o.batch);
  cmd->add_option("--lr", o.lr);
  cmd->add_option("--seed", o.seed);
  cmd->add_option("--log-interval", o.log_interval);
  cmd->add_option("--levels", o.levels);
  cmd->add_option("--blocks", o.blocks);
  cmd->add_option("--channels", o.channels);
  cmd->add_option("--block", o.block, "full|vanilla|wo_att|wo_dilated|mean_att|std_att");
  cmd->add_option("--dgge", o.dgge, "Enable the geometry encoder (true/false)");
  cmd->add_option("--projector", o.projector, "Enable the light projector (true/false)");
  cmd->add_option("--augment", o.augment, "Random horizontal flips (true/false)");
  cmd->add_option("--data", o.data, "Training dataset directory");
  cmd->add_option("--eval-data", o.eval_data, "Held-out dataset directory");
  cmd->add_option("--out", o.out, "Checkpoint path");
  cmd->add_option("--report", o.report, "JSON-lines report path");
  cmd->add_option("--resume", o.resume, "Checkpoint to continue from");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c;
  if (!o.config.empty()) c = RunConfig::load(o.config);
  if (o.iterations) c.run.iterations = *o.iterations;
  if (o.batch) c.run.batch_size = *o.batch;
  if (o.lr) c.run.lr = *o.lr;
  if (o.seed) c.run.seed = *o.seed;
  if (o.log_interval) c.run.log_interval = *o.log_interval;
  if (o.levels) c.model.levels = *o.levels;
  if (o.blocks) c.model.blocks = *o.blocks;
  if (o.channels) c.model.channels = *o.channels;
  if (o.block) c.model.block = block_variant_from_string(*o.block);
  if (o.dgge) c.model.use_dgge = *o.dgge;
  if (o.projector) c.model.use_light_projector = *o.projector;
  if (o.augment) c.run.augment = *o.augment;
  if (o.data) c.run.train_data = *o.data;
  if (o.eval_data) c.run.eval_data = *o.eval_data;
  if (o.out) c.run.checkpoint = *o.out;
  if (o.report) c.run.report = *o.report;
  if (o.resume) c.run.resume = *o.resume;
  c.validate();
  return c;
}

// A generated dataset (manifest.json) or paired input/ target/ [depth/] folders.
Dataset load_data(const std::string& dir) {
  const fs::path d(dir);
  if (fs::exists(d / "manifest.json") || !fs::is_directory(d / "input")) return Dataset::load(d);
  std::optional<fs::path> depth;
  if (fs::is_directory(d / "depth")) depth = d / "depth";
  return Dataset::from_directories(d / "input", d / "target", depth);
}

void echo_config(const json& j) { std::cout << "config " << j.dump() << std::endl; }

std::string fmt_db(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void print_eval(const EvalResult& r, bool per_image) {
  if (per_image) {
    std::printf("%-16s %9s %9s %9s | %9s %9s %9s\n", "image", "psnr", "ssim_rgb", "ssim_y", "copy_psnr", "copy_rgb",
                "copy_y");
    for (const auto& m : r.images)
      std::printf("%-16s %9s %9.4f %9.4f | %9s %9.4f %9.4f\n", m.name.c_str(), fmt_db(m.psnr).c_str(), m.ssim_rgb,
                  m.ssim_luma, fmt_db(m.copy_psnr).c_str(), m.copy_ssim_rgb, m.copy_ssim_luma);
  }
  std::printf("%-16s %9s %9s %9s\n", "", "psnr", "ssim_rgb", "ssim_y");
  std::printf("%-16s %9s %9.4f %9.4f\n", "model", fmt_db(r.psnr).c_str(), r.ssim_rgb, r.ssim_luma);
  std::printf("%-16s %9s %9.4f %9.4f\n", "copy baseline", fmt_db(r.copy_psnr).c_str(), r.copy_ssim_rgb,
              r.copy_ssim_luma);
}

int cmd_gen_data(const DatasetSpec& spec, const std::string& out) {
  echo_config(to_json(spec));
  gen_dataset(spec, out);
  std::cout << "wrote " << spec.count << " pairs to " << out << std::endl;
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  echo_config(cfg.to_json());
  check(!cfg.run.train_data.empty(), "train: no training data (set run.train_data or --data)");
  const Dataset train = load_data(cfg.run.train_data);
  check_compatible(cfg.model, train);
  std::optional<Dataset> eval;
  if (!cfg.run.eval_data.empty()) {
    eval = load_data(cfg.run.eval_data);
    check_compatible(cfg.model, *eval);
  }
  std::ofstream report;
  if (!cfg.run.report.empty()) {
    report.open(cfg.run.report);
    check(report.good(), "train: cannot write report '" + cfg.run.report + "'");
  }
  std::optional<Trainer> trainer;
  if (!cfg.run.resume.empty())
    trainer.emplace(cfg, train, load_checkpoint(cfg.run.resume));
  else
    trainer.emplace(cfg, train);
  std::cout << "parameters " << trainer->model().parameter_count() << std::endl;
  const auto rep = trainer->run(eval ? &*eval : nullptr, [&](const IntervalLog& l) {
    const json j = to_json(l);
    std::cout << j.dump() << std::endl;
    if (report.is_open()) report << j.dump() << '\n' << std::flush;
  });
  for (const auto& [it, r] : rep.evals) {
    json j = {{"iteration", it}, {"eval", to_json(r)}};
    std::cout << j.dump() << std::endl;
    if (report.is_open()) report << j.dump() << '\n';
  }
  save_checkpoint(trainer->checkpoint(), cfg.run.checkpoint);
  std::cout << "saved " << cfg.run.checkpoint << " after " << rep.iterations << " iterations ("
            << fmt_db(rep.seconds) << " s)" << std::endl;
  return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& input, const std::string& depth,
              const std::vector<double>& light, const std::string& out, bool all_levels) {
  const auto ckpt = load_checkpoint(ckpt_path);
  echo_config(to_json(ckpt.config));
  const Model model = model_from_checkpoint(ckpt);
  const auto& cfg = model.config();
  const Tensor img = load_image(input);
  const Shape s4{1, 3, img.dim(1), img.dim(2)};
  Tensor d, l;
  if (cfg.use_dgge) {
    check(!depth.empty(), "infer: this model needs --depth");
    const Tensor dm = load_gray(depth);
    check(dm.dim(1) == img.dim(1) && dm.dim(2) == img.dim(2), "infer: depth size differs from the image");
    d = reshape(dm, {1, 1, dm.dim(1), dm.dim(2)});
  } else {
    check(depth.empty(), "infer: this model takes no depth map");
  }
  if (cfg.use_light_projector) {
    check(light.size() == kShCoeffs, "infer: this model needs --light with 9 coefficients");
    l = Tensor({1, kShCoeffs}, std::vector<float>(light.begin(), light.end()));
  } else {
    check(light.empty(), "infer: this model takes no target light");
  }
  NoGradGuard ng;
  const auto outs = model.forward(reshape(img, s4), d.defined() ? &d : nullptr, l.defined() ? &l : nullptr);
  save_image(clamp01(outs[0]), out);
  std::cout << "wrote " << out << std::endl;
  if (all_levels) {
    const fs::path p(out);
    for (std::size_t k = 1; k < outs.size(); ++k) {
      const auto q = p.parent_path() / (p.stem().string() + "_level" + std::to_string(k) + p.extension().string());
      save_image(clamp01(outs[k]), q);
      std::cout << "wrote " << q.string() << std::endl;
    }
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data, bool per_image, bool as_json) {
  const auto ckpt = load_checkpoint(ckpt_path);
  echo_config(to_json(ckpt.config));
  const Model model = model_from_checkpoint(ckpt);
  const Dataset ds = load_data(data);
  const auto r = evaluate(model, ds);
  if (as_json)
    std::cout << to_json(r, per_image).dump(1) << std::endl;
  else
    print_eval(r, per_image);
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& opt) {
  echo_config({{"seed", opt.seed}, {"h", opt.h}, {"network", opt.include_network}});
  bool ok = true;
  run_gradcheck_suite(opt, [&](const GradcheckResult& r) {
    std::printf("%-36s max_rel_err %.3e  (tol %.0e, %lld entries)  %s\n", r.name.c_str(), r.max_rel_error, r.tolerance,
                static_cast<long long>(r.elements), r.passed() ? "ok" : "FAIL");
    std::fflush(stdout);
    ok = ok && r.passed();
  });
  return ok ? 0 : 1;
}

int cmd_info(const RunConfig& cfg, std::int64_t size) {
  echo_config(cfg.to_json());
  const auto n = count_params(cfg.model);
  const auto s = size > 0 ? size : cfg.model.image_size;
  const auto m = estimate_macs(cfg.model, s, s);
  std::printf("parameters %lld (%.3f M)\n", static_cast<long long>(n), double(n) / 1e6);
  std::printf("macs at %lldx%lld: %.3f G\n", static_cast<long long>(s), static_cast<long long>(s), m.total / 1e9);
  for (const auto& [k, v] : m.modules) std::printf("  %-12s %.3f G\n", k.c_str(), v / 1e9);
  std::printf("  resampling (not in total) %.3f G\n", m.resampling / 1e9);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Illumination-aware relighting network"};
  app.require_subcommand(1);

  DatasetSpec spec;
  std::string gen_out, gen_config;
  std::string policy = "fixed_pair";
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic paired dataset");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--config", gen_config, "Run configuration JSON (dataset section)");
  auto* o_count = gen->add_option("--count", spec.count);
  auto* o_size = gen->add_option("--size", spec.size);
  auto* o_seed = gen->add_option("--seed", spec.seed);
  auto* o_policy = gen->add_option("--policy", policy, "fixed_pair|random_pairs");

  Overrides train_o, info_o;
  auto* train = app.add_subcommand("train", "Train a model");
  add_run_flags(train, train_o);

  std::string ckpt, input, depth, out;
  std::vector<double> light;
  bool all_levels = false;
  auto* infer = app.add_subcommand("infer", "Relight one image");
  infer->add_option("--ckpt", ckpt)->required();
  infer->add_option("--input", input)->required();
  infer->add_option("--depth", depth, "16-bit depth PNG");
  infer->add_option("--light", light, "Nine SH coefficients of the target light")->expected(kShCoeffs);
  infer->add_option("--out", out)->required();
  infer->add_flag("--all-levels", all_levels, "Also write the coarser outputs");

  std::string eval_ckpt, eval_data;
  bool per_image = false, as_json = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--ckpt", eval_ckpt)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_flag("--per-image", per_image);
  eval->add_flag("--json", as_json);

  GradcheckOptions gc;
  bool no_network = false;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  grad->add_option("--seed", gc.seed);
  grad->add_option("--step", gc.h, "Central-difference step");
  grad->add_flag("--no-network", no_network, "Skip the full-network spot check");

  std::int64_t info_size = 0;
  auto* info = app.add_subcommand("info", "Parameter count and MACs breakdown");
  add_run_flags(info, info_o);
  info->add_option("--size", info_size, "Square input size (default: model.image_size)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) {
      if (!gen_config.empty()) spec = RunConfig::load(gen_config).dataset;
      // Flags win over the file.
      DatasetSpec flags = spec;
      if (!gen_config.empty()) {
        if (o_count->count()) flags.count = std::stoi(o_count->as<std::string>());
        if (o_size->count()) flags.size = o_size->as<std::int64_t>();
        if (o_seed->count()) flags.seed = o_seed->as<std::uint64_t>();
      }
      if (o_policy->count() || gen_config.empty()) flags.policy = light_policy_from_string(policy);
      return cmd_gen_data(flags, gen_out);
    }
    if (*train) return cmd_train(resolve(train_o));
    if (*infer) return cmd_infer(ckpt, input, depth, light, out, all_levels);
    if (*eval) return cmd_eval(eval_ckpt, eval_data, per_image, as_json);
    if (*grad) {
      gc.include_network = !no_network;
      return cmd_gradcheck(gc);
    }
    if (*info) return cmd_info(resolve(info_o), info_size);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}
