#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "amddx/augmentation.hpp"
#include "amddx/image_store.hpp"
#include "amddx/loss.hpp"
#include "amddx/model.hpp"
#include "amddx/optimizer.hpp"
#include "amddx/params_io.hpp"
#include "amddx/resize.hpp"
#include "amddx/rng.hpp"

namespace amddx {

// al = joint diagnosis + lesion training, ao = diagnosis-only ablation
// (identical codepath with the lesion loss weight forced to zero).
enum class TrainMode { al, ao };

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "al") return TrainMode::al;
  if (s == "ao") return TrainMode::ao;
  throw std::invalid_argument("unknown training mode: " + s);
}

struct TrainSettings {
  ModelConfig model;
  LossConfig loss;
  OptimizerConfig optimizer;
  AugmentationConfig augmentation;
  int resize_width = 720;
  TrainMode mode = TrainMode::al;
  std::optional<std::string> pretrained_trunk;

  LossConfig effective_loss() const {
    LossConfig l = loss;
    if (mode == TrainMode::ao) l.alpha = 0.0;
    return l;
  }
};

struct EpochStats {
  double total = 0.0;
  double diagnosis = 0.0;
  double lesion = 0.0;
  double seconds = 0.0;
};

struct TrainingHistory {
  std::vector<EpochStats> epochs;
};

template <typename Scalar>
struct FoldResult {
  ModelParams<Scalar> params;
  std::optional<Normalization> normalization;
  TrainingHistory history;
};

// Per-sample pipeline shared by training and prediction: augmentation happens
// at native resolution, then the width resize, then optional standardization.
template <typename Scalar>
Tensor<Scalar> prepare_input(Tensor<Scalar> image, int resize_width,
                             const std::optional<Normalization>& norm) {
  Tensor<Scalar> resized = resize_to_width(image, resize_width);
  if (norm) apply_normalization(resized, *norm);
  return resized;
}

// Online training, batch size 1: every epoch shuffles the sample order with
// the run's rng, augments, resizes, and takes one Adam step per sample.
template <typename Scalar>
FoldResult<Scalar> train_fold(const ImageStore<Scalar>& store,
                              const std::vector<std::string>& train_ids,
                              const TrainSettings& settings, std::uint64_t seed) {
  if (train_ids.empty()) throw std::invalid_argument("training set is empty");
  settings.model.validate();
  settings.optimizer.validate();
  const LossConfig loss_cfg = settings.effective_loss();
  loss_cfg.validate();

  const DatasetManifest& manifest = store.manifest();
  std::vector<const Sample*> samples;
  samples.reserve(train_ids.size());
  for (const auto& id : train_ids) {
    const Sample* s = manifest.find(id);
    if (!s) throw std::invalid_argument("unknown sample id in training set: " + id);
    if (!s->diagnosis) throw std::invalid_argument("sample lacks diagnosis: " + id);
    samples.push_back(s);
  }

  FoldResult<Scalar> result;
  std::optional<Normalization> norm;
  std::optional<std::filesystem::path> trunk_path;
  if (settings.pretrained_trunk) trunk_path = *settings.pretrained_trunk;
  result.params = init_params<Scalar>(settings.model, derive_seed(seed, 0), trunk_path, norm);
  result.normalization = norm;

  AdamState<Scalar> adam = make_adam_state<Scalar>(settings.model);
  ModelParams<Scalar> grads = make_params<Scalar>(settings.model);
  Rng rng(derive_seed(seed, 1));
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < settings.optimizer.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    EpochStats stats;
    for (std::size_t idx : order) {
      const Sample& sample = *samples[idx];
      Tensor<Scalar> img = augment(store.get(sample), settings.augmentation, rng);
      Tensor<Scalar> input = prepare_input(std::move(img), settings.resize_width, norm);

      ForwardTrace<Scalar> trace;
      model_forward(result.params, settings.model, input, &trace);
      const Eigen::RowVectorXd probs = trace.probs.template cast<double>();
      const LossBreakdown breakdown = total_loss(probs, *sample.diagnosis, sample.lesions, loss_cfg);
      if (!std::isfinite(breakdown.total))
        throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                 ", sample " + sample.sample_id);
      const Eigen::RowVectorXd dlogits =
          loss_logit_gradient(probs, *sample.diagnosis, sample.lesions, loss_cfg);
      model_backward(result.params, settings.model, trace,
                     RowVectorX<Scalar>(dlogits.cast<Scalar>()), grads);
      adam_step(result.params, grads, adam, settings.optimizer);

      stats.total += breakdown.total;
      stats.diagnosis += breakdown.diagnosis;
      stats.lesion += breakdown.lesion;
    }
    const double n = static_cast<double>(samples.size());
    stats.total /= n;
    stats.diagnosis /= n;
    stats.lesion /= n;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(stats);

    bool finite = true;
    for_each_array(result.params, [&](const std::string&, const MatrixX<Scalar>& m) {
      finite = finite && m.allFinite();
    });
    if (!finite)
      throw std::runtime_error("non-finite parameters after epoch " + std::to_string(epoch));
  }
  return result;
}

template <typename Scalar>
PredictionRecord predict_sample(const ModelParams<Scalar>& params, const ModelConfig& cfg,
                                const Tensor<Scalar>& image, int resize_width,
                                const std::optional<Normalization>& norm, bool want_maps) {
  Tensor<Scalar> input = prepare_input(image, resize_width, norm);
  return classify(params, cfg, input, want_maps);
}

struct CvRun {
  int repetition = 0;
  int fold = 0;
  TrainingHistory history;
  std::vector<PredictionRecord> predictions;  // held-out fold, plan order
};

template <typename Scalar>
struct CvResult {
  std::vector<CvRun> runs;  // index = repetition * k + fold
  std::vector<ModelParams<Scalar>> params;
  std::vector<std::optional<Normalization>> normalizations;
};

// Trains every (repetition, fold) pair on the fold's complement and predicts
// the held-out fold. Runs are seeded independently via derive_seed(seed, run
// index), so scheduling them across threads cannot change any result.
template <typename Scalar>
CvResult<Scalar> run_cross_validation(const ImageStore<Scalar>& store, const FoldPlan& plan,
                                      const TrainSettings& settings, std::uint64_t seed,
                                      int jobs = 1, bool want_maps = false) {
  const int k = plan.k();
  const int n_runs = static_cast<int>(plan.repetitions.size()) * k;
  CvResult<Scalar> result;
  result.runs.resize(n_runs);
  result.params.resize(n_runs);
  result.normalizations.resize(n_runs);

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    for (int r = next.fetch_add(1); r < n_runs; r = next.fetch_add(1)) {
      if (failed.load()) return;
      const int rep = r / k, fold = r % k;
      try {
        std::vector<std::string> train_ids;
        for (int f = 0; f < k; ++f)
          if (f != fold)
            train_ids.insert(train_ids.end(), plan.repetitions[rep][f].begin(),
                             plan.repetitions[rep][f].end());
        FoldResult<Scalar> trained =
            train_fold(store, train_ids, settings, derive_seed(seed, static_cast<std::uint64_t>(r)));

        CvRun run;
        run.repetition = rep;
        run.fold = fold;
        run.history = std::move(trained.history);
        for (const auto& id : plan.repetitions[rep][fold]) {
          const Sample* s = store.manifest().find(id);
          if (!s) throw std::runtime_error("fold references unknown sample: " + id);
          PredictionRecord rec =
              predict_sample(trained.params, settings.model, store.get(*s), settings.resize_width,
                             trained.normalization, want_maps);
          rec.sample_id = id;
          run.predictions.push_back(std::move(rec));
        }
        result.runs[r] = std::move(run);
        result.params[r] = std::move(trained.params);
        result.normalizations[r] = trained.normalization;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed.store(true);
        if (failure.empty())
          failure = "repetition " + std::to_string(rep) + ", fold " + std::to_string(fold) + ": " +
                    e.what();
      }
    }
  };

  const int n_threads = std::max(1, std::min(jobs, n_runs));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw std::runtime_error("cross-validation failed at " + failure);
  return result;
}

}  // namespace amddx
