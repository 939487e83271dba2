#include "amddx/evaluation.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "amddx/image_io.hpp"
#include "amddx/resize.hpp"

namespace amddx {

namespace {

struct Tally {
  double score;
  int pos;
  int neg;
};

// Distinct scores in descending order with per-score positive/negative counts.
std::vector<Tally> tally_scores(const std::vector<ScoredLabel>& scored) {
  std::map<double, std::pair<int, int>> by_score;
  for (const auto& s : scored) {
    if (!std::isfinite(s.score)) throw std::invalid_argument("non-finite score");
    auto& counts = by_score[s.score];
    if (s.label)
      ++counts.first;
    else
      ++counts.second;
  }
  std::vector<Tally> out;
  for (auto it = by_score.rbegin(); it != by_score.rend(); ++it)
    out.push_back({it->first, it->second.first, it->second.second});
  return out;
}

Curve undefined_curve(Curve::Kind kind, const std::string& reason) {
  Curve c;
  c.kind = kind;
  c.defined = false;
  c.undefined_reason = reason;
  return c;
}

}  // namespace

Curve roc_curve(const std::vector<ScoredLabel>& scored) {
  int total_pos = 0, total_neg = 0;
  for (const auto& s : scored) (s.label ? total_pos : total_neg)++;
  if (total_pos == 0 || total_neg == 0)
    return undefined_curve(Curve::Kind::roc, "needs at least one positive and one negative");

  Curve c;
  c.kind = Curve::Kind::roc;
  c.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  int tp = 0, fp = 0;
  for (const Tally& t : tally_scores(scored)) {
    tp += t.pos;
    fp += t.neg;
    c.points.push_back({static_cast<double>(fp) / total_neg, static_cast<double>(tp) / total_pos,
                        t.score});
  }
  return c;
}

Curve pr_curve(const std::vector<ScoredLabel>& scored) {
  int total_pos = 0;
  for (const auto& s : scored) total_pos += s.label ? 1 : 0;
  if (total_pos == 0) return undefined_curve(Curve::Kind::pr, "needs at least one positive");

  Curve c;
  c.kind = Curve::Kind::pr;
  int tp = 0, fp = 0;
  for (const Tally& t : tally_scores(scored)) {
    tp += t.pos;
    fp += t.neg;
    const double recall = static_cast<double>(tp) / total_pos;
    const double precision = static_cast<double>(tp) / (tp + fp);
    if (c.points.empty())
      c.points.push_back({0.0, precision, std::numeric_limits<double>::infinity()});
    c.points.push_back({recall, precision, t.score});
  }
  return c;
}

std::optional<double> auc(const Curve& curve) {
  if (!curve.defined || curve.points.size() < 2) return std::nullopt;
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.x - a.x) * (a.y + b.y) / 2.0;
  }
  return area;
}

namespace {

// Piecewise-linear y at x over a curve whose x values are non-decreasing.
double interpolate_y(const Curve& c, double x) {
  const auto& pts = c.points;
  if (x <= pts.front().x) return pts.front().y;
  if (x >= pts.back().x) return pts.back().y;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].x < x) continue;
    const double x0 = pts[i - 1].x, x1 = pts[i].x;
    if (x1 == x0) return pts[i].y;
    const double w = (x - x0) / (x1 - x0);
    return pts[i - 1].y + w * (pts[i].y - pts[i - 1].y);
  }
  return pts.back().y;
}

}  // namespace

Curve merged_curve(const std::vector<std::vector<ScoredLabel>>& sets, Curve::Kind kind,
                   bool vertical_average) {
  if (sets.empty()) throw std::invalid_argument("merged_curve needs at least one set");
  auto build = [&](const std::vector<ScoredLabel>& s) {
    return kind == Curve::Kind::roc ? roc_curve(s) : pr_curve(s);
  };
  if (!vertical_average) {
    std::vector<ScoredLabel> pooled;
    for (const auto& s : sets) pooled.insert(pooled.end(), s.begin(), s.end());
    return build(pooled);
  }

  std::vector<Curve> curves;
  for (const auto& s : sets) {
    Curve c = build(s);
    if (!c.defined) return c;
    curves.push_back(std::move(c));
  }
  std::set<double> grid;
  for (const Curve& c : curves)
    for (const CurvePoint& p : c.points) grid.insert(p.x);
  Curve out;
  out.kind = kind;
  for (double x : grid) {
    double y = 0.0;
    for (const Curve& c : curves) y += interpolate_y(c, x);
    out.points.push_back({x, y / curves.size(), std::numeric_limits<double>::quiet_NaN()});
  }
  return out;
}

MetricReport metric_report(const std::vector<PredictionRecord>& predictions,
                           const DatasetManifest& manifest) {
  MetricReport report;
  for (int target = 0; target <= kNumLesions; ++target) {
    std::vector<ScoredLabel> scored;
    for (const PredictionRecord& rec : predictions) {
      const Sample* s = manifest.find(rec.sample_id);
      if (!s) throw std::invalid_argument("prediction for unknown sample: " + rec.sample_id);
      if (rec.probabilities.size() != kNumLesions + 1)
        throw std::invalid_argument("prediction vector length for sample " + rec.sample_id);
      if (target == 0) {
        if (s->diagnosis) scored.push_back({rec.probabilities[0], *s->diagnosis});
      } else if (s->lesions) {
        scored.push_back({rec.probabilities[target], (*s->lesions)[target - 1]});
      }
    }
    TargetMetrics m;
    m.target = target == 0 ? "diagnosis" : kLesionNames[target - 1];
    for (const auto& s : scored) (s.label ? m.positives : m.negatives)++;
    const Curve roc = roc_curve(scored);
    const Curve pr = pr_curve(scored);
    m.auc_roc = auc(roc);
    m.auc_pr = auc(pr);
    m.roc_points = static_cast<int>(roc.points.size());
    m.pr_points = static_cast<int>(pr.points.size());
    report.targets.push_back(std::move(m));
  }
  return report;
}

std::string format_percent(const std::optional<double>& fraction) {
  if (!fraction) return "undefined";
  const double scaled = *fraction * 10000.0;  // hundredths of a percent
  const long long r = static_cast<long long>(std::llround(scaled));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%lld.%02lld", r < 0 ? "-" : "", std::llabs(r) / 100,
                std::llabs(r) % 100);
  return buf;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::json targets = nlohmann::json::array();
  for (const TargetMetrics& m : report.targets) {
    nlohmann::json t;
    t["target"] = m.target;
    t["auc_roc_pct"] = m.auc_roc ? nlohmann::json(format_percent(m.auc_roc)) : nlohmann::json();
    t["auc_pr_pct"] = m.auc_pr ? nlohmann::json(format_percent(m.auc_pr)) : nlohmann::json();
    t["auc_roc"] = m.auc_roc ? nlohmann::json(*m.auc_roc) : nlohmann::json();
    t["auc_pr"] = m.auc_pr ? nlohmann::json(*m.auc_pr) : nlohmann::json();
    t["positives"] = m.positives;
    t["negatives"] = m.negatives;
    t["roc_points"] = m.roc_points;
    t["pr_points"] = m.pr_points;
    targets.push_back(std::move(t));
  }
  return nlohmann::json{{"targets", targets}}.dump(2) + "\n";
}

void save_report(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  out << report_to_json(report);
}

void save_curve_csv(const Curve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curve: " + path.string());
  out << "kind,x,y\n";
  const char* kind = curve.kind == Curve::Kind::roc ? "roc" : "pr";
  char buf[80];
  for (const CurvePoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", kind, p.x, p.y);
    out << buf;
  }
}

void export_activation_overlay(const Tensor<double>& image, const PredictionRecord& prediction,
                               const std::filesystem::path& out_dir) {
  if (prediction.activation_maps.empty())
    throw std::invalid_argument("prediction carries no activation maps");
  std::filesystem::create_directories(out_dir);

  // One scale across all maps of this sample so channels stay comparable.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& m : prediction.activation_maps) {
    lo = std::min(lo, m.minCoeff());
    hi = std::max(hi, m.maxCoeff());
  }
  const double span = hi > lo ? hi - lo : 1.0;

  for (std::size_t c = 0; c < prediction.activation_maps.size(); ++c) {
    const Eigen::MatrixXd& m = prediction.activation_maps[c];
    const std::string cls = c < kNumLesions ? kLesionNames[c] : std::to_string(c);

    Tensor<double> map_t(static_cast<int>(m.rows()), static_cast<int>(m.cols()), 1, 0);
    for (int y = 0; y < map_t.height; ++y)
      for (int x = 0; x < map_t.width; ++x) map_t.at(0, y, x) = (m(y, x) - lo) / span;

    RawImage gray;
    gray.height = map_t.height;
    gray.width = map_t.width;
    gray.channels = 1;
    gray.pixels.resize(static_cast<std::size_t>(gray.height) * gray.width);
    for (int y = 0; y < gray.height; ++y)
      for (int x = 0; x < gray.width; ++x)
        gray.pixels[static_cast<std::size_t>(y) * gray.width + x] =
            static_cast<unsigned char>(std::lround(std::clamp(map_t.at(0, y, x), 0.0, 1.0) * 255.0));
    encode_png(out_dir / (prediction.sample_id + "_map_" + cls + ".png"), gray);

    // Upsample by the trunk's downsampling factor and blend onto the image.
    Tensor<double> up = bilinear_resize(map_t, map_t.height * 16, map_t.width * 16);
    Tensor<double> overlay = image;
    for (int y = 0; y < overlay.height; ++y)
      for (int x = 0; x < overlay.width; ++x) {
        const int uy = std::min(y, up.height - 1), ux = std::min(x, up.width - 1);
        const double w = 0.6 * std::clamp(up.at(0, uy, ux), 0.0, 1.0);
        overlay.at(0, y, x) = (1 - w) * overlay.at(0, y, x) + w;  // push red up
        overlay.at(1, y, x) *= 1 - w;
        overlay.at(2, y, x) *= 1 - w;
      }
    clamp01(overlay);
    encode_png(out_dir / (prediction.sample_id + "_overlay_" + cls + ".png"),
               tensor_to_image(overlay));
  }
}

}  // namespace amddx
