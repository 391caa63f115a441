#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "model.hpp"
#include "trainer.hpp"

namespace r2u3d {

struct DataConfig {
  /// Directory holding <id>_image.vol and <id>_mask.vol pairs.
  std::filesystem::path root;
  std::vector<std::string> train_ids;
  std::vector<std::string> eval_ids;
  /// Depth every scan is resampled to; 0 keeps the stored depth.
  int64_t target_depth = 0;
};

struct PathsConfig {
  std::filesystem::path checkpoint;
  std::filesystem::path report;
  std::filesystem::path train_log;
};

/// Everything one CLI invocation needs. Relative paths are resolved against
/// the directory of the document they were read from.
struct RunConfig {
  ModelConfig model = ModelConfig::preset_dynamic();
  TrainConfig train;
  DataConfig data;
  PathsConfig paths;
  uint64_t seed = 0;
  bool deterministic = true;
  double threshold = 0.5;

  void validate() const;
};

/// Full snapshot; round-trips through model_config_from_json.
std::string model_config_to_json(const ModelConfig& cfg);
/// Accepts an object with an optional "preset" plus overrides. Unknown keys are errors.
ModelConfig model_config_from_json(const std::string& text);

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

/// Reads and preprocesses the listed scans from data.root.
std::vector<Scan> load_scans(const DataConfig& data, const std::vector<std::string>& ids);

}  // namespace r2u3d
