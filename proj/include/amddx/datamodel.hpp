#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace amddx {

// Canonical lesion order. Every label vector, model output and report row
// uses this order; nothing may reorder it.
enum class LesionClass { drusen = 0, exudate = 1, hemorrhage = 2, scar = 3, others = 4 };

inline constexpr int kNumLesions = 5;
inline constexpr std::array<const char*, kNumLesions> kLesionNames{
    "drusen", "exudate", "hemorrhage", "scar", "others"};

inline const char* lesion_name(LesionClass c) { return kLesionNames[static_cast<int>(c)]; }

using LesionLabels = std::array<int, kNumLesions>;

struct Sample {
  std::string sample_id;
  std::string image_ref;                 // path, possibly relative to the manifest directory
  std::optional<int> diagnosis;          // 1 = AMD, 0 = non-AMD, absent = unknown
  std::optional<LesionLabels> lesions;   // absent when no lesion annotation exists
  std::string eye_group_id;              // samples sharing an id never split across folds

  bool lesion_labels_known() const { return lesions.has_value(); }
};

struct DatasetManifest {
  std::string name;
  std::vector<Sample> samples;
  // Directory the manifest was loaded from; relative image_refs resolve
  // against it. Not serialized.
  std::filesystem::path base_dir;

  const Sample* find(const std::string& sample_id) const;
  std::filesystem::path resolve_image_path(const Sample& s) const;
};

// Per-sample network output: probability vector (index 0 = diagnosis,
// 1..N = lesions in canonical order) plus the optional pre-pooling
// activation map of each lesion channel.
struct PredictionRecord {
  std::string sample_id;
  Eigen::VectorXd probabilities;                 // length kNumLesions + 1, values in [0, 1]
  std::vector<Eigen::MatrixXd> activation_maps;  // empty or kNumLesions maps (h x w)
};

// Grouped cross-validation plan: for every repetition, k folds of sample ids.
struct FoldPlan {
  std::uint64_t seed = 0;
  std::vector<std::vector<std::vector<std::string>>> repetitions;

  int k() const { return repetitions.empty() ? 0 : static_cast<int>(repetitions.front().size()); }
};

// Returns human-readable invariant violations, one per problem; empty means
// the manifest is well formed. Violations are reported, never thrown.
std::vector<std::string> validate_manifest(const DatasetManifest& manifest);

DatasetManifest parse_manifest(const std::string& json_text);
std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

FoldPlan parse_fold_plan(const std::string& json_text);
std::string serialize_fold_plan(const FoldPlan& plan);
FoldPlan load_fold_plan(const std::filesystem::path& path);
void save_fold_plan(const FoldPlan& plan, const std::filesystem::path& path);

}  // namespace amddx
