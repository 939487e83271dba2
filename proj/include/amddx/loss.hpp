#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "amddx/datamodel.hpp"
#include "amddx/tensor.hpp"

namespace amddx {

struct LossConfig {
  double alpha = 0.5;  // weight of the lesion term relative to diagnosis
  int n_lesions = kNumLesions;
  double epsilon_clamp = 1e-7;
  // Samples without lesion labels either contribute no lesion loss (mask) or
  // are treated as lesion-free (negative).
  enum class UnlabeledPolicy { mask, negative };
  UnlabeledPolicy unlabeled_policy = UnlabeledPolicy::mask;

  void validate() const {
    if (alpha < 0) throw std::invalid_argument("alpha must be >= 0");
    if (!(epsilon_clamp > 0 && epsilon_clamp < 0.5))
      throw std::invalid_argument("epsilon_clamp must be in (0, 0.5)");
    if (n_lesions < 1) throw std::invalid_argument("n_lesions must be >= 1");
  }
};

inline double bce(double p, int y, double eps = 1e-7) {
  const double q = std::clamp(p, eps, 1.0 - eps);
  return y ? -std::log(q) : -std::log1p(-q);
}

struct LossBreakdown {
  double total = 0.0;
  double diagnosis = 0.0;
  double lesion = 0.0;
  bool lesion_used = false;
};

// total = diagnosis + alpha * lesion, where the lesion part averages the
// per-class BCE terms. All aggregation is in double regardless of the model
// scalar so the decomposition identity holds at machine precision.
inline LossBreakdown total_loss(const Eigen::RowVectorXd& probs, int diagnosis,
                                const std::optional<LesionLabels>& lesions,
                                const LossConfig& cfg) {
  if (probs.size() != cfg.n_lesions + 1) throw std::invalid_argument("probability vector length");
  if (diagnosis != 0 && diagnosis != 1) throw std::invalid_argument("diagnosis must be 0 or 1");
  LossBreakdown out;
  out.diagnosis = bce(probs[0], diagnosis, cfg.epsilon_clamp);
  const bool as_negative = !lesions && cfg.unlabeled_policy == LossConfig::UnlabeledPolicy::negative;
  // alpha == 0 drops the lesion term entirely, matching the gradient path.
  if ((lesions || as_negative) && cfg.alpha != 0.0) {
    double sum = 0.0;
    for (int i = 0; i < cfg.n_lesions; ++i)
      sum += bce(probs[i + 1], lesions ? (*lesions)[i] : 0, cfg.epsilon_clamp);
    out.lesion = sum / cfg.n_lesions;
    out.lesion_used = true;
  }
  out.total = out.diagnosis + cfg.alpha * out.lesion;
  return out;
}

// d(total_loss)/d(logit). For sigmoid feeding clamped BCE the per-output
// derivative is p - y, or exactly 0 where the clamp is engaged (the clamped
// value no longer depends on the logit, which keeps finite differences and
// analytic gradients consistent).
inline double bce_logit_gradient(double p, int y, double eps) {
  if (p < eps || p > 1.0 - eps) return 0.0;
  return p - y;
}

inline Eigen::RowVectorXd loss_logit_gradient(const Eigen::RowVectorXd& probs, int diagnosis,
                                              const std::optional<LesionLabels>& lesions,
                                              const LossConfig& cfg) {
  Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(cfg.n_lesions + 1);
  g[0] = bce_logit_gradient(probs[0], diagnosis, cfg.epsilon_clamp);
  const bool as_negative = !lesions && cfg.unlabeled_policy == LossConfig::UnlabeledPolicy::negative;
  if ((lesions || as_negative) && cfg.alpha != 0.0) {
    const double w = cfg.alpha / cfg.n_lesions;
    for (int i = 0; i < cfg.n_lesions; ++i)
      g[i + 1] = w * bce_logit_gradient(probs[i + 1], lesions ? (*lesions)[i] : 0, cfg.epsilon_clamp);
  }
  return g;
}

}  // namespace amddx
