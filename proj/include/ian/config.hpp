#pragma once

// JSON form of every configurable structure. Readers start from the
// supplied defaults, overwrite the keys present and reject unknown keys.

#include <filesystem>
#include <string>

#include "ian/dataset.hpp"
#include "ian/losses.hpp"
#include "ian/network.hpp"
#include "json.hpp"

namespace ian {

using json = nlohmann::json;

json to_json(const IANConfig& c);
IANConfig ian_config_from_json(const json& j, IANConfig base = {});

json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const json& j, LossWeights base = {});

json to_json(const DatasetSpec& s);
DatasetSpec dataset_spec_from_json(const json& j, DatasetSpec base = {});

struct RunParams {
  int iterations = 2000;
  int batch_size = 5;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  int log_interval = 10;
  int eval_interval = 0;  // 0: evaluate only at the end
  bool augment = false;
  std::string train_data;
  std::string eval_data;
  std::string checkpoint = "model.ianckpt";
  std::string report;  // JSON-lines path; empty disables
  std::string resume;  // checkpoint to continue from

  void validate() const;
  bool operator==(const RunParams&) const = default;
};

json to_json(const RunParams& r);
RunParams run_params_from_json(const json& j, RunParams base = {});

struct RunConfig {
  IANConfig model;
  LossWeights loss;
  DatasetSpec dataset;
  RunParams run;

  json to_json() const;
  static RunConfig from_json(const json& j, const RunConfig& base = {});
  static RunConfig load(const std::filesystem::path& path, const RunConfig& base = {});
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

}  // namespace ian
