#pragma once

// Paired relighting data: synthetic generation, manifest I/O, a generic
// paired-directory adapter and seeded batch iteration.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ian/render.hpp"

namespace ian {

struct ScenePair {
  Tensor input;   // [3,H,W]
  Tensor target;  // [3,H,W]
  Tensor depth;   // [1,H,W] in [0,1]; undefined when absent
  std::optional<LightSpec> light_in;
  std::optional<LightSpec> light_out;
  std::optional<SceneDescriptor> scene;
  std::string name;
};

/// Mirrors images, depth, scene and both lights (SH follows the flipped
/// direction).
ScenePair hflip_pair(const ScenePair& p);

enum class LightPolicy { fixed_pair, random_pairs };
std::string to_string(LightPolicy p);
LightPolicy light_policy_from_string(const std::string& s);

struct DatasetSpec {
  int count = 200;
  std::int64_t size = 64;
  std::uint64_t seed = 7;
  LightPolicy policy = LightPolicy::fixed_pair;
  SceneRanges ranges;
  double ambient = 0.15;
  double intensity = 0.85;
  double elevation = 40.0;  // fixed-pair elevation
  double min_elevation = 20.0;
  double max_elevation = 70.0;

  void validate() const;
  bool operator==(const DatasetSpec&) const = default;
};

/// The fixed pair: north light at 4500 K to east light at 6500 K.
std::pair<LightSpec, LightSpec> fixed_light_pair(const DatasetSpec& spec);

/// Renders one pair (record index `i`) without touching the disk.
ScenePair synth_pair(const DatasetSpec& spec, Rng& rng, int i);

/// Writes pair_XXXX_{in,gt,depth}.png and manifest.json into `dir`.
void gen_dataset(const DatasetSpec& spec, const std::filesystem::path& dir);

inline constexpr int kManifestVersion = 1;

class Dataset {
 public:
  /// Reads a directory produced by gen_dataset.
  static Dataset load(const std::filesystem::path& dir);
  /// Pairs files with identical names in two directories (plus an optional
  /// depth directory, matched by stem).
  static Dataset from_directories(const std::filesystem::path& inputs, const std::filesystem::path& targets,
                                  const std::optional<std::filesystem::path>& depths = std::nullopt);
  static Dataset from_pairs(std::vector<ScenePair> pairs);

  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const ScenePair& operator[](std::size_t i) const { return pairs_[i]; }
  const std::vector<ScenePair>& pairs() const { return pairs_; }
  bool has_depth() const;
  bool has_lights() const;
  std::int64_t height() const { return pairs_.empty() ? 0 : pairs_[0].input.dim(1); }
  std::int64_t width() const { return pairs_.empty() ? 0 : pairs_[0].input.dim(2); }
  const std::optional<DatasetSpec>& spec() const { return spec_; }

 private:
  std::vector<ScenePair> pairs_;
  std::optional<DatasetSpec> spec_;
};

struct Batch {
  Tensor input;      // [B,3,H,W]
  Tensor target;     // [B,3,H,W]
  Tensor depth;      // [B,1,H,W] or undefined
  Tensor light_in;   // [B,9] or undefined
  Tensor light_out;  // [B,9] or undefined
  std::vector<std::size_t> indices;
  std::vector<bool> flipped;
};

/// Stacks pairs[idx] (optionally flipped) into tensors.
Batch make_batch(const Dataset& data, const std::vector<std::size_t>& idx, const std::vector<bool>& flip = {});

/// Endless stream of batches. Each epoch is a fresh seeded permutation; the
/// last batch of an epoch may be short. With `augment`, each sample is
/// flipped with probability 1/2.
class BatchStream {
 public:
  BatchStream(const Dataset& data, std::size_t batch_size, std::uint64_t seed, bool augment);
  Batch next();
  std::int64_t epoch() const { return epoch_; }
  const Rng& rng() const { return rng_; }
  Rng& rng() { return rng_; }

 private:
  void reshuffle();
  const Dataset* data_;
  std::size_t batch_;
  bool augment_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::int64_t epoch_ = -1;
};

}  // namespace ian
