#include "amddx/runconfig.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace amddx {

namespace {

using nlohmann::json;

ModelConfig model_from_json(const json& j) {
  ModelConfig cfg;
  if (j.contains("preset")) {
    cfg = ModelConfig::preset(j.at("preset").get<std::string>());
  } else {
    cfg.block_channels = j.at("block_channels").get<std::vector<std::vector<int>>>();
  }
  if (j.contains("input_channels")) cfg.input_channels = j.at("input_channels").get<int>();
  if (j.contains("n_lesions")) cfg.n_lesions = j.at("n_lesions").get<int>();
  if (j.contains("pool_output")) cfg.pool_output = j.at("pool_output").get<int>();
  cfg.validate();
  return cfg;
}

LossConfig loss_from_json(const json& j) {
  LossConfig cfg;
  if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
  if (j.contains("epsilon_clamp")) cfg.epsilon_clamp = j.at("epsilon_clamp").get<double>();
  if (j.contains("unlabeled_policy")) {
    const std::string p = j.at("unlabeled_policy").get<std::string>();
    if (p == "mask")
      cfg.unlabeled_policy = LossConfig::UnlabeledPolicy::mask;
    else if (p == "negative")
      cfg.unlabeled_policy = LossConfig::UnlabeledPolicy::negative;
    else
      throw std::invalid_argument("unlabeled_policy must be mask or negative");
  }
  cfg.validate();
  return cfg;
}

OptimizerConfig optimizer_from_json(const json& j) {
  OptimizerConfig cfg;
  if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("beta1")) cfg.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) cfg.beta2 = j.at("beta2").get<double>();
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  cfg.validate();
  return cfg;
}

AugmentationConfig augmentation_from_json(const json& j) {
  AugmentationConfig cfg;
  if (j.contains("brightness_delta")) cfg.brightness_delta = j.at("brightness_delta").get<double>();
  if (j.contains("color_scale")) {
    const auto range = j.at("color_scale").get<std::array<double, 2>>();
    cfg.color_scale_lo = range[0];
    cfg.color_scale_hi = range[1];
  }
  if (j.contains("scale")) {
    const auto range = j.at("scale").get<std::array<double, 2>>();
    cfg.scale_lo = range[0];
    cfg.scale_hi = range[1];
  }
  if (j.contains("shear_degrees")) cfg.shear_deg = j.at("shear_degrees").get<double>();
  if (j.contains("rotation_degrees")) cfg.rotation_deg = j.at("rotation_degrees").get<double>();
  if (j.contains("flip_prob")) cfg.flip_prob = j.at("flip_prob").get<double>();
  if (j.contains("identity") && j.at("identity").get<bool>()) cfg = AugmentationConfig::identity();
  return cfg;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  const json doc = json::parse(json_text);
  RunConfig cfg;

  const json& dataset = doc.at("dataset");
  cfg.manifest_path = resolve(base_dir, dataset.at("manifest").get<std::string>());

  cfg.model = doc.contains("model") ? model_from_json(doc.at("model")) : ModelConfig::preset("desk");
  if (doc.contains("loss")) cfg.loss = loss_from_json(doc.at("loss"));
  if (doc.contains("optimizer")) cfg.optimizer = optimizer_from_json(doc.at("optimizer"));
  if (doc.contains("augmentation")) cfg.augmentation = augmentation_from_json(doc.at("augmentation"));

  const json& folds = doc.at("folds");
  if (folds.contains("k")) cfg.fold_k = folds.at("k").get<int>();
  if (folds.contains("repetitions")) cfg.fold_repetitions = folds.at("repetitions").get<int>();
  if (!folds.contains("seed")) throw std::invalid_argument("folds.seed is required");
  cfg.fold_seed = folds.at("seed").get<std::uint64_t>();

  if (!doc.contains("train_seed")) throw std::invalid_argument("train_seed is required");
  cfg.train_seed = doc.at("train_seed").get<std::uint64_t>();

  if (doc.contains("resize_width")) cfg.resize_width = doc.at("resize_width").get<int>();
  if (doc.contains("precision")) {
    cfg.precision = doc.at("precision").get<std::string>();
    if (cfg.precision != "f32" && cfg.precision != "f64")
      throw std::invalid_argument("precision must be f32 or f64");
  }
  if (doc.contains("pretrained_trunk") && !doc.at("pretrained_trunk").is_null())
    cfg.pretrained_trunk = resolve(base_dir, doc.at("pretrained_trunk").get<std::string>()).string();
  if (doc.contains("output_dir"))
    cfg.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

void save_predictions(const std::vector<PredictionRow>& rows, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const PredictionRow& r : rows) {
    std::vector<double> probs(r.probabilities.data(), r.probabilities.data() + r.probabilities.size());
    arr.push_back(
        {{"sample_id", r.sample_id}, {"repetition", r.repetition}, {"probabilities", probs}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictions: " + path.string());
  out << arr.dump(2) << "\n";
}

std::vector<PredictionRow> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions: " + path.string());
  nlohmann::json arr;
  in >> arr;
  std::vector<PredictionRow> rows;
  for (const auto& j : arr) {
    PredictionRow r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.repetition = j.at("repetition").get<int>();
    const auto probs = j.at("probabilities").get<std::vector<double>>();
    r.probabilities = Eigen::Map<const Eigen::VectorXd>(probs.data(),
                                                        static_cast<Eigen::Index>(probs.size()));
    rows.push_back(std::move(r));
  }
  return rows;
}

void save_history_csv(const TrainingHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history: " + path.string());
  out << "epoch,total,diagnosis,lesion\n";
  char buf[128];
  for (std::size_t i = 0; i < history.epochs.size(); ++i) {
    const EpochStats& e = history.epochs[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", i, e.total, e.diagnosis, e.lesion);
    out << buf;
  }
}

}  // namespace amddx
