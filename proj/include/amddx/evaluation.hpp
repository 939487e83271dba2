#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "amddx/datamodel.hpp"
#include "amddx/tensor.hpp"

namespace amddx {

struct ScoredLabel {
  double score = 0.0;
  int label = 0;  // 1 positive, 0 negative
};

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  double threshold = 0.0;
};

// Operating curve; undefined when the input cannot support one (single-class
// ROC, positive-free PR). Undefined curves carry a reason instead of points.
struct Curve {
  enum class Kind { roc, pr };
  Kind kind = Kind::roc;
  std::vector<CurvePoint> points;
  bool defined = true;
  std::string undefined_reason;
};

// One point per distinct score (ties grouped), thresholds descending,
// anchored at (0,0); the last group closes the curve at (1,1). x = false
// positive rate, y = recall.
Curve roc_curve(const std::vector<ScoredLabel>& scored);

// One point per distinct threshold, descending; x = recall, y = precision.
// The zero-recall anchor repeats the first threshold's precision.
Curve pr_curve(const std::vector<ScoredLabel>& scored);

// Trapezoidal area over x. Undefined curves and curves with fewer than two
// points yield nullopt.
std::optional<double> auc(const Curve& curve);

// Summary curve across repetitions: pools every (score, label) pair into one
// set and builds a single curve. With vertical_average, instead averages the
// per-set curves' y values over the union of their x grids (thresholds are
// meaningless there and set to NaN).
Curve merged_curve(const std::vector<std::vector<ScoredLabel>>& sets, Curve::Kind kind,
                   bool vertical_average = false);

struct TargetMetrics {
  std::string target;  // "diagnosis" or a lesion class name
  std::optional<double> auc_roc;  // fractions in [0, 1]; nullopt = undefined
  std::optional<double> auc_pr;
  int positives = 0;
  int negatives = 0;
  int roc_points = 0;
  int pr_points = 0;
};

struct MetricReport {
  std::vector<TargetMetrics> targets;  // diagnosis first, then lesions in canonical order
};

// Pools all predictions per target (multiple repetitions welcome) against the
// manifest's labels. Lesion targets use only lesion-labeled samples.
MetricReport metric_report(const std::vector<PredictionRecord>& predictions,
                           const DatasetManifest& manifest);

// Percentage with two decimals, rounding half away from zero (e.g. 0.94005
// -> "94.01"). Undefined values render as "undefined".
std::string format_percent(const std::optional<double>& fraction);

std::string report_to_json(const MetricReport& report);
void save_report(const MetricReport& report, const std::filesystem::path& path);
void save_curve_csv(const Curve& curve, const std::filesystem::path& path);

// Writes <id>_map_<class>.png (grayscale, one shared min-max scale across the
// sample's maps) and <id>_overlay_<class>.png (map bilinearly upsampled 16x
// and blended onto the retinography) for every lesion channel.
void export_activation_overlay(const Tensor<double>& image, const PredictionRecord& prediction,
                               const std::filesystem::path& out_dir);

}  // namespace amddx
