#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "amddx/training.hpp"

namespace amddx {

// One experiment = one JSON file. Seeds are mandatory so a run can always be
// reproduced; every other field has the documented default. Relative paths
// resolve against the config file's directory.
struct RunConfig {
  std::filesystem::path manifest_path;
  ModelConfig model;
  LossConfig loss;
  OptimizerConfig optimizer;
  AugmentationConfig augmentation;
  int fold_k = 2;
  int fold_repetitions = 5;
  std::uint64_t fold_seed = 0;
  std::uint64_t train_seed = 0;
  int resize_width = 720;
  std::string precision = "f32";  // f32 | f64
  std::optional<std::string> pretrained_trunk;
  std::filesystem::path output_dir;

  TrainSettings train_settings(TrainMode mode) const {
    TrainSettings s;
    s.model = model;
    s.loss = loss;
    s.optimizer = optimizer;
    s.augmentation = augmentation;
    s.resize_width = resize_width;
    s.mode = mode;
    s.pretrained_trunk = pretrained_trunk;
    return s;
  }
};

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Flat prediction rows as written to predictions JSON:
// [{"sample_id", "repetition", "probabilities"}]
struct PredictionRow {
  std::string sample_id;
  int repetition = 0;
  Eigen::VectorXd probabilities;
};

void save_predictions(const std::vector<PredictionRow>& rows, const std::filesystem::path& path);
std::vector<PredictionRow> load_predictions(const std::filesystem::path& path);

void save_history_csv(const TrainingHistory& history, const std::filesystem::path& path);

}  // namespace amddx
