#include "ian/config.hpp"

#include <fstream>
#include <set>

namespace ian {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  check(j.is_object(), where + ": expected a JSON object");
  for (const auto& [k, v] : j.items())
    check(known.count(k) > 0, where + ": unknown key '" + k + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(where + "." + key + ": " + e.what());
  }
}

}  // namespace

json to_json(const IANConfig& c) {
  return {{"levels", c.levels},
          {"blocks", c.blocks},
          {"channels", c.channels},
          {"image_size", c.image_size},
          {"use_dgge", c.use_dgge},
          {"use_light_projector", c.use_light_projector},
          {"block", to_string(c.block)},
          {"use_ilsc", c.use_ilsc},
          {"use_clsc", c.use_clsc},
          {"use_icsc", c.use_icsc},
          {"guide_depth", c.guide_depth},
          {"guide_normal", c.guide_normal},
          {"guide_pe", c.guide_pe},
          {"projector_hidden", c.projector_hidden},
          {"light_embed_dim", c.light_embed_dim}};
}

IANConfig ian_config_from_json(const json& j, IANConfig c) {
  const std::string w = "model";
  reject_unknown(j, {"levels", "blocks", "channels", "image_size", "use_dgge", "use_light_projector", "block",
                     "use_ilsc", "use_clsc", "use_icsc", "guide_depth", "guide_normal", "guide_pe",
                     "projector_hidden", "light_embed_dim"},
                 w);
  read(j, "levels", c.levels, w);
  read(j, "blocks", c.blocks, w);
  read(j, "channels", c.channels, w);
  read(j, "image_size", c.image_size, w);
  read(j, "use_dgge", c.use_dgge, w);
  read(j, "use_light_projector", c.use_light_projector, w);
  std::string block = to_string(c.block);
  read(j, "block", block, w);
  c.block = block_variant_from_string(block);
  read(j, "use_ilsc", c.use_ilsc, w);
  read(j, "use_clsc", c.use_clsc, w);
  read(j, "use_icsc", c.use_icsc, w);
  read(j, "guide_depth", c.guide_depth, w);
  read(j, "guide_normal", c.guide_normal, w);
  read(j, "guide_pe", c.guide_pe, w);
  read(j, "projector_hidden", c.projector_hidden, w);
  read(j, "light_embed_dim", c.light_embed_dim, w);
  return c;
}

json to_json(const LossWeights& l) {
  return {{"alpha", l.alpha}, {"beta", l.beta}, {"gamma", l.gamma}, {"level", l.level}};
}

LossWeights loss_weights_from_json(const json& j, LossWeights l) {
  const std::string w = "loss";
  reject_unknown(j, {"alpha", "beta", "gamma", "level"}, w);
  read(j, "alpha", l.alpha, w);
  read(j, "beta", l.beta, w);
  read(j, "gamma", l.gamma, w);
  read(j, "level", l.level, w);
  return l;
}

json to_json(const DatasetSpec& s) {
  return {{"count", s.count},
          {"size", s.size},
          {"seed", s.seed},
          {"policy", to_string(s.policy)},
          {"ambient", s.ambient},
          {"intensity", s.intensity},
          {"elevation", s.elevation},
          {"min_elevation", s.min_elevation},
          {"max_elevation", s.max_elevation},
          {"min_spheres", s.ranges.min_spheres},
          {"max_spheres", s.ranges.max_spheres},
          {"min_radius", s.ranges.min_radius},
          {"max_radius", s.ranges.max_radius},
          {"min_albedo", s.ranges.min_albedo},
          {"max_albedo", s.ranges.max_albedo}};
}

DatasetSpec dataset_spec_from_json(const json& j, DatasetSpec s) {
  const std::string w = "dataset";
  reject_unknown(j, {"count", "size", "seed", "policy", "ambient", "intensity", "elevation", "min_elevation",
                     "max_elevation", "min_spheres", "max_spheres", "min_radius", "max_radius", "min_albedo",
                     "max_albedo"},
                 w);
  read(j, "count", s.count, w);
  read(j, "size", s.size, w);
  read(j, "seed", s.seed, w);
  std::string policy = to_string(s.policy);
  read(j, "policy", policy, w);
  s.policy = light_policy_from_string(policy);
  read(j, "ambient", s.ambient, w);
  read(j, "intensity", s.intensity, w);
  read(j, "elevation", s.elevation, w);
  read(j, "min_elevation", s.min_elevation, w);
  read(j, "max_elevation", s.max_elevation, w);
  read(j, "min_spheres", s.ranges.min_spheres, w);
  read(j, "max_spheres", s.ranges.max_spheres, w);
  read(j, "min_radius", s.ranges.min_radius, w);
  read(j, "max_radius", s.ranges.max_radius, w);
  read(j, "min_albedo", s.ranges.min_albedo, w);
  read(j, "max_albedo", s.ranges.max_albedo, w);
  return s;
}

void RunParams::validate() const {
  check(iterations >= 0, "run: iterations must be >= 0");
  check(batch_size >= 1, "run: batch_size must be >= 1");
  check(lr > 0, "run: lr must be positive");
  check(log_interval >= 1, "run: log_interval must be >= 1");
  check(eval_interval >= 0, "run: eval_interval must be >= 0");
}

json to_json(const RunParams& r) {
  return {{"iterations", r.iterations}, {"batch_size", r.batch_size},   {"lr", r.lr},
          {"seed", r.seed},             {"log_interval", r.log_interval}, {"eval_interval", r.eval_interval},
          {"augment", r.augment},       {"train_data", r.train_data},   {"eval_data", r.eval_data},
          {"checkpoint", r.checkpoint}, {"report", r.report},           {"resume", r.resume}};
}

RunParams run_params_from_json(const json& j, RunParams r) {
  const std::string w = "run";
  reject_unknown(j, {"iterations", "batch_size", "lr", "seed", "log_interval", "eval_interval", "augment",
                     "train_data", "eval_data", "checkpoint", "report", "resume"},
                 w);
  read(j, "iterations", r.iterations, w);
  read(j, "batch_size", r.batch_size, w);
  read(j, "lr", r.lr, w);
  read(j, "seed", r.seed, w);
  read(j, "log_interval", r.log_interval, w);
  read(j, "eval_interval", r.eval_interval, w);
  read(j, "augment", r.augment, w);
  read(j, "train_data", r.train_data, w);
  read(j, "eval_data", r.eval_data, w);
  read(j, "checkpoint", r.checkpoint, w);
  read(j, "report", r.report, w);
  read(j, "resume", r.resume, w);
  return r;
}

json RunConfig::to_json() const {
  return {{"model", ian::to_json(model)},
          {"loss", ian::to_json(loss)},
          {"dataset", ian::to_json(dataset)},
          {"run", ian::to_json(run)}};
}

RunConfig RunConfig::from_json(const json& j, const RunConfig& base) {
  reject_unknown(j, {"model", "loss", "dataset", "run"}, "config");
  RunConfig c = base;
  if (j.contains("model")) c.model = ian_config_from_json(j.at("model"), c.model);
  if (j.contains("loss")) c.loss = loss_weights_from_json(j.at("loss"), c.loss);
  if (j.contains("dataset")) c.dataset = dataset_spec_from_json(j.at("dataset"), c.dataset);
  if (j.contains("run")) c.run = run_params_from_json(j.at("run"), c.run);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream f(path);
  check(f.good(), "cannot read config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw Error("config '" + path.string() + "': " + e.what());
  }
  return from_json(j, base);
}

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  dataset.validate();
  run.validate();
}

}  // namespace ian
