// Command-line front end: dataset ingestion, fold planning, cross-validation
// training, evaluation, activation-map export and synthetic data generation.
// Exit codes: 0 success, 1 computation failure, 2 usage or input error.
#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "amddx/datamodel.hpp"
#include "amddx/evaluation.hpp"
#include "amddx/image_store.hpp"
#include "amddx/ingestion.hpp"
#include "amddx/params_io.hpp"
#include "amddx/runconfig.hpp"
#include "amddx/synthdata.hpp"
#include "amddx/training.hpp"

namespace fs = std::filesystem;
using namespace amddx;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// AMDDX_OUT beats whatever the config or flag requested.
fs::path effective_out_dir(const fs::path& configured) {
  if (const char* env = std::getenv("AMDDX_OUT"); env && *env) return fs::path(env);
  if (configured.empty()) throw UsageError("no output directory configured (flag or AMDDX_OUT)");
  return configured;
}

void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

DatasetManifest load_validated_manifest(const fs::path& path) {
  require_exists(path, "manifest");
  DatasetManifest manifest = load_manifest(path);
  const auto violations = validate_manifest(manifest);
  if (!violations.empty()) {
    std::string msg = "manifest fails validation:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw UsageError(msg);
  }
  return manifest;
}

int cmd_ingest(const std::string& dataset, const fs::path& root,
               const std::optional<fs::path>& eye_groups, int min_lesion_pixels,
               const fs::path& out) {
  require_exists(root, "dataset root");
  if (eye_groups) require_exists(*eye_groups, "eye-group file");

  DatasetManifest manifest;
  if (dataset == "ichallenge")
    manifest = load_ichallenge(root, eye_groups, min_lesion_pixels);
  else
    manifest = load_evaluation_set(root, dataset);

  const auto violations = validate_manifest(manifest);
  save_manifest(manifest, out);
  const fs::path report_path = out.string() + ".validation.txt";
  std::ofstream report(report_path);
  if (violations.empty()) {
    report << "ok: " << manifest.samples.size() << " samples\n";
  } else {
    for (const auto& v : violations) report << v << "\n";
  }
  std::cout << "wrote " << out.string() << " (" << manifest.samples.size() << " samples)\n";
  if (!violations.empty()) {
    std::cerr << "validation violations:\n";
    for (const auto& v : violations) std::cerr << "  " << v << "\n";
    return 1;
  }
  return 0;
}

int cmd_folds(const fs::path& manifest_path, int k, int repetitions, std::uint64_t seed,
              const fs::path& out) {
  const DatasetManifest manifest = load_validated_manifest(manifest_path);
  const FoldPlan plan = build_folds(manifest, k, repetitions, seed);
  save_fold_plan(plan, out);
  std::cout << "wrote " << out.string() << " (" << plan.repetitions.size() << " repetitions x "
            << plan.k() << " folds)\n";
  return 0;
}

template <typename Scalar>
int run_cv_typed(const RunConfig& cfg, TrainMode mode, int jobs, const fs::path& out_dir) {
  const DatasetManifest manifest = load_validated_manifest(cfg.manifest_path);
  const FoldPlan plan = build_folds(manifest, cfg.fold_k, cfg.fold_repetitions, cfg.fold_seed);
  fs::create_directories(out_dir);
  save_fold_plan(plan, out_dir / "folds.json");

  ImageStore<Scalar> store(manifest);
  store.preload();

  const TrainSettings settings = cfg.train_settings(mode);
  const CvResult<Scalar> result =
      run_cross_validation(store, plan, settings, cfg.train_seed, jobs);

  const std::string mode_tag = mode == TrainMode::al ? "al" : "ao";
  std::vector<PredictionRow> rows;
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const CvRun& run = result.runs[r];
    const std::string stem =
        mode_tag + "_rep" + std::to_string(run.repetition) + "_fold" + std::to_string(run.fold);
    save_params(out_dir / ("params_" + stem + ".bin"), cfg.model, result.params[r],
                result.normalizations[r]);
    save_history_csv(run.history, out_dir / ("history_" + stem + ".csv"));
    for (const PredictionRecord& rec : run.predictions)
      rows.push_back({rec.sample_id, run.repetition, rec.probabilities});
    std::cerr << "finished repetition " << run.repetition << " fold " << run.fold << " ("
              << run.history.epochs.size() << " epochs)\n";
  }
  save_predictions(rows, out_dir / ("predictions_" + mode_tag + ".json"));
  std::cout << "wrote " << (out_dir / ("predictions_" + mode_tag + ".json")).string() << "\n";
  return 0;
}

int cmd_cv(const fs::path& config_path, const std::string& mode_str, int jobs) {
  require_exists(config_path, "run config");
  const RunConfig cfg = load_run_config(config_path);
  const TrainMode mode = parse_train_mode(mode_str);
  const fs::path out_dir = effective_out_dir(cfg.output_dir);
  if (cfg.precision == "f64") return run_cv_typed<double>(cfg, mode, jobs, out_dir);
  return run_cv_typed<float>(cfg, mode, jobs, out_dir);
}

std::vector<PredictionRecord> rows_to_records(const std::vector<PredictionRow>& rows) {
  std::vector<PredictionRecord> records;
  for (const PredictionRow& r : rows) {
    PredictionRecord rec;
    rec.sample_id = r.sample_id;
    rec.probabilities = r.probabilities;
    records.push_back(std::move(rec));
  }
  return records;
}

void write_report_and_curves(const std::vector<PredictionRecord>& records,
                             const DatasetManifest& manifest, const fs::path& out_dir,
                             const std::string& prefix) {
  const MetricReport report = metric_report(records, manifest);
  save_report(report, out_dir / (prefix + "report.json"));

  for (int target = 0; target <= kNumLesions; ++target) {
    std::vector<ScoredLabel> scored;
    for (const PredictionRecord& rec : records) {
      const Sample* s = manifest.find(rec.sample_id);
      if (!s) continue;
      if (target == 0) {
        if (s->diagnosis) scored.push_back({rec.probabilities[0], *s->diagnosis});
      } else if (s->lesions) {
        scored.push_back({rec.probabilities[target], (*s->lesions)[target - 1]});
      }
    }
    const std::string name = target == 0 ? "diagnosis" : kLesionNames[target - 1];
    const Curve roc = roc_curve(scored);
    if (roc.defined) save_curve_csv(roc, out_dir / (prefix + "roc_" + name + ".csv"));
    const Curve pr = pr_curve(scored);
    if (pr.defined) save_curve_csv(pr, out_dir / (prefix + "pr_" + name + ".csv"));
  }
  std::cout << "wrote " << (out_dir / (prefix + "report.json")).string() << "\n";
}

template <typename Scalar>
std::vector<PredictionRow> predict_external(const DatasetManifest& manifest,
                                            const std::vector<fs::path>& params_paths,
                                            int resize_width) {
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < params_paths.size(); ++i) {
    const LoadedParams<Scalar> loaded = load_params<Scalar>(params_paths[i]);
    ImageStore<Scalar> store(manifest);
    for (const Sample& s : manifest.samples) {
      PredictionRecord rec = predict_sample(loaded.params, loaded.config, store.get(s),
                                            resize_width, loaded.normalization, false);
      rows.push_back({s.sample_id, static_cast<int>(i), rec.probabilities});
    }
  }
  return rows;
}

int cmd_eval(const fs::path& manifest_path, const std::optional<fs::path>& predictions_path,
             const std::optional<fs::path>& external_manifest,
             const std::vector<fs::path>& params_paths, int resize_width,
             const std::string& precision, const fs::path& out_flag) {
  const fs::path out_dir = effective_out_dir(out_flag);
  fs::create_directories(out_dir);

  if (external_manifest) {
    if (params_paths.empty())
      throw UsageError("--external needs at least one --params archive");
    for (const auto& p : params_paths) require_exists(p, "params archive");
    const DatasetManifest ext = load_validated_manifest(*external_manifest);
    const std::vector<PredictionRow> rows =
        precision == "f64" ? predict_external<double>(ext, params_paths, resize_width)
                           : predict_external<float>(ext, params_paths, resize_width);
    save_predictions(rows, out_dir / "external_predictions.json");
    write_report_and_curves(rows_to_records(rows), ext, out_dir, "external_");
    return 0;
  }

  if (!predictions_path) throw UsageError("--predictions is required unless --external is given");
  require_exists(*predictions_path, "predictions file");
  const DatasetManifest manifest = load_validated_manifest(manifest_path);
  const std::vector<PredictionRow> rows = load_predictions(*predictions_path);
  write_report_and_curves(rows_to_records(rows), manifest, out_dir, "");
  return 0;
}

template <typename Scalar>
int run_maps_typed(const fs::path& params_path, const DatasetManifest& manifest,
                   const std::vector<std::string>& ids, int resize_width,
                   const fs::path& out_dir) {
  const LoadedParams<Scalar> loaded = load_params<Scalar>(params_path);
  ImageStore<Scalar> store(manifest);
  for (const std::string& id : ids) {
    const Sample* s = manifest.find(id);
    if (!s) throw UsageError("sample not in manifest: " + id);
    const Tensor<Scalar> original = store.get(*s);
    PredictionRecord rec = predict_sample(loaded.params, loaded.config, original, resize_width,
                                          loaded.normalization, true);
    rec.sample_id = id;
    // Overlay base: the resized retinography without standardization.
    Tensor<double> base(original.height, original.width, original.channels(), original.pad);
    base.data = original.data.template cast<double>();
    export_activation_overlay(resize_to_width(base, resize_width), rec, out_dir);
  }
  std::cout << "wrote maps for " << ids.size() << " samples under " << out_dir.string() << "\n";
  return 0;
}

int cmd_maps(const fs::path& params_path, const fs::path& manifest_path, const std::string& ids_csv,
             int resize_width, const std::string& precision, const fs::path& out_flag) {
  require_exists(params_path, "params archive");
  const DatasetManifest manifest = load_validated_manifest(manifest_path);
  std::vector<std::string> ids;
  std::string cur;
  for (char c : ids_csv) {
    if (c == ',') {
      if (!cur.empty()) ids.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) ids.push_back(cur);
  if (ids.empty()) throw UsageError("--ids must name at least one sample");
  const fs::path out_dir = effective_out_dir(out_flag);
  fs::create_directories(out_dir);
  if (precision == "f64")
    return run_maps_typed<double>(params_path, manifest, ids, resize_width, out_dir);
  return run_maps_typed<float>(params_path, manifest, ids, resize_width, out_dir);
}

int cmd_synth(int n, std::uint64_t seed, int image_size, const fs::path& out_flag) {
  const fs::path out_dir = effective_out_dir(out_flag);
  SynthConfig cfg;
  cfg.n_samples = n;
  cfg.seed = seed;
  cfg.image_size = image_size;
  const SynthResult result = generate_synthetic(cfg, out_dir);
  save_manifest(result.manifest, out_dir / "manifest.json");
  save_geometry(result.geometry, out_dir / "geometry.json");
  std::cout << "wrote " << result.manifest.samples.size() << " samples under " << out_dir.string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AMD diagnosis and lesion identification pipeline"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert a dataset directory into a manifest");
  std::string ingest_dataset;
  fs::path ingest_root, ingest_out;
  std::string ingest_groups;
  int ingest_min_pixels = 1;
  ingest->add_option("--dataset", ingest_dataset, "ichallenge | aria | stare")->required();
  ingest->add_option("--root", ingest_root, "dataset root directory")->required();
  ingest->add_option("--eye-groups", ingest_groups, "same-eye group JSON file");
  ingest->add_option("--min-lesion-pixels", ingest_min_pixels, "foreground pixels for presence");
  ingest->add_option("--out", ingest_out, "output manifest path")->required();

  // folds
  auto* folds = app.add_subcommand("folds", "Build a grouped cross-validation plan");
  fs::path folds_manifest, folds_out;
  int folds_k = 2, folds_reps = 5;
  std::uint64_t folds_seed = 0;
  folds->add_option("--manifest", folds_manifest)->required();
  folds->add_option("--k", folds_k, "folds per repetition");
  folds->add_option("--repetitions", folds_reps);
  folds->add_option("--seed", folds_seed)->required();
  folds->add_option("--out", folds_out)->required();

  // cv
  auto* cv = app.add_subcommand("cv", "Run repeated cross-validation training");
  fs::path cv_config;
  std::string cv_mode = "al";
  int cv_jobs = 1;
  cv->add_option("--config", cv_config, "run config JSON")->required();
  cv->add_option("--mode", cv_mode, "al (joint) | ao (diagnosis only)");
  cv->add_option("--jobs", cv_jobs, "parallel fold runs");

  // eval
  auto* eval = app.add_subcommand("eval", "Compute metric reports and curves");
  fs::path eval_manifest, eval_out;
  std::string eval_predictions, eval_external;
  std::vector<fs::path> eval_params;
  int eval_width = 720;
  std::string eval_precision = "f32";
  eval->add_option("--manifest", eval_manifest, "manifest matching the predictions")->required();
  eval->add_option("--predictions", eval_predictions, "predictions JSON from cv");
  eval->add_option("--external", eval_external, "external manifest to predict with saved params");
  eval->add_option("--params", eval_params, "params archives for --external (repeatable)");
  eval->add_option("--resize-width", eval_width);
  eval->add_option("--precision", eval_precision, "f32 | f64");
  eval->add_option("--out", eval_out, "output directory");

  // maps
  auto* maps = app.add_subcommand("maps", "Export activation maps and overlays");
  fs::path maps_params, maps_manifest, maps_out;
  std::string maps_ids;
  int maps_width = 720;
  std::string maps_precision = "f32";
  maps->add_option("--params", maps_params)->required();
  maps->add_option("--manifest", maps_manifest)->required();
  maps->add_option("--ids", maps_ids, "comma-separated sample ids")->required();
  maps->add_option("--resize-width", maps_width);
  maps->add_option("--precision", maps_precision, "f32 | f64");
  maps->add_option("--out", maps_out, "output directory");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  int synth_n = 200, synth_size = 128;
  std::uint64_t synth_seed = 1;
  fs::path synth_out;
  synth->add_option("--n", synth_n, "sample count")->required();
  synth->add_option("--seed", synth_seed)->required();
  synth->add_option("--image-size", synth_size);
  synth->add_option("--out", synth_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) {
      std::optional<fs::path> groups;
      if (!ingest_groups.empty()) groups = fs::path(ingest_groups);
      return cmd_ingest(ingest_dataset, ingest_root, groups, ingest_min_pixels, ingest_out);
    }
    if (*folds) return cmd_folds(folds_manifest, folds_k, folds_reps, folds_seed, folds_out);
    if (*cv) return cmd_cv(cv_config, cv_mode, cv_jobs);
    if (*eval) {
      std::optional<fs::path> preds, external;
      if (!eval_predictions.empty()) preds = fs::path(eval_predictions);
      if (!eval_external.empty()) external = fs::path(eval_external);
      return cmd_eval(eval_manifest, preds, external, eval_params, eval_width, eval_precision,
                      eval_out);
    }
    if (*maps)
      return cmd_maps(maps_params, maps_manifest, maps_ids, maps_width, maps_precision, maps_out);
    if (*synth) return cmd_synth(synth_n, synth_seed, synth_size, synth_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
