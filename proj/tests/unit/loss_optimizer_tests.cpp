#include "doctest.h"

#include <cmath>
#include <utility>
#include <vector>

#include "amddx/loss.hpp"
#include "amddx/model.hpp"
#include "amddx/optimizer.hpp"
#include "amddx/rng.hpp"

using namespace amddx;

TEST_CASE("binary cross entropy frozen values") {
  CHECK(bce(0.5, 1) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(bce(0.5, 0) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(bce(0.9, 1) == doctest::Approx(0.10536051565782628).epsilon(1e-14));
  CHECK(bce(0.9, 0) == doctest::Approx(2.302585092994046).epsilon(1e-14));
  // Clamp engages at eps = 1e-7: -log(1e-7).
  CHECK(bce(0.0, 1) == doctest::Approx(16.11809565095832).epsilon(1e-14));
  CHECK(bce(1.0, 0) == doctest::Approx(-std::log1p(-(1.0 - 1e-7))).epsilon(1e-9));
}

TEST_CASE("total loss decomposes exactly") {
  Rng rng(21);
  LossConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::RowVectorXd probs(6);
    for (int i = 0; i < 6; ++i) probs[i] = rng.uniform();
    const int diag = rng.bernoulli(0.5) ? 1 : 0;
    LesionLabels labels;
    for (int& l : labels) l = rng.bernoulli(0.5) ? 1 : 0;
    cfg.alpha = rng.uniform(0.0, 2.0);

    const LossBreakdown b = total_loss(probs, diag, labels, cfg);
    CHECK(std::abs(b.total - (b.diagnosis + cfg.alpha * b.lesion)) <= 1e-12);
    CHECK(b.lesion_used);

    // The lesion term is the mean of the per-class terms.
    double mean = 0.0;
    for (int i = 0; i < 5; ++i) mean += bce(probs[i + 1], labels[i], cfg.epsilon_clamp);
    mean /= 5.0;
    CHECK(b.lesion == doctest::Approx(mean).epsilon(1e-15));
  }
}

TEST_CASE("alpha zero equals the diagnosis-only loss exactly") {
  Rng rng(22);
  LossConfig joint;
  joint.alpha = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::RowVectorXd probs(6);
    for (int i = 0; i < 6; ++i) probs[i] = rng.uniform();
    LesionLabels labels{1, 0, 1, 1, 0};
    const LossBreakdown b = total_loss(probs, 1, labels, joint);
    CHECK(b.total == bce(probs[0], 1, joint.epsilon_clamp));
  }
}

TEST_CASE("unlabeled samples: mask drops the lesion term, negative keeps it") {
  Eigen::RowVectorXd probs(6);
  probs << 0.7, 0.6, 0.4, 0.2, 0.9, 0.5;
  LossConfig cfg;

  const LossBreakdown masked = total_loss(probs, 1, std::nullopt, cfg);
  CHECK(!masked.lesion_used);
  CHECK(masked.lesion == 0.0);
  CHECK(masked.total == masked.diagnosis);

  cfg.unlabeled_policy = LossConfig::UnlabeledPolicy::negative;
  const LossBreakdown neg = total_loss(probs, 1, std::nullopt, cfg);
  CHECK(neg.lesion_used);
  const LossBreakdown as_zeros = total_loss(probs, 1, LesionLabels{0, 0, 0, 0, 0}, cfg);
  CHECK(neg.total == as_zeros.total);
}

TEST_CASE("logit gradients are p minus y, scaled by alpha over n") {
  Eigen::RowVectorXd probs(6);
  probs << 0.7, 0.6, 0.4, 0.2, 0.9, 0.5;
  LossConfig cfg;
  cfg.alpha = 0.5;
  const LesionLabels labels{1, 0, 0, 1, 1};
  const Eigen::RowVectorXd g = loss_logit_gradient(probs, 1, labels, cfg);
  CHECK(g[0] == doctest::Approx(0.7 - 1.0).epsilon(1e-15));
  for (int i = 0; i < 5; ++i)
    CHECK(g[i + 1] == doctest::Approx(0.1 * (probs[i + 1] - labels[i])).epsilon(1e-12));
}

TEST_CASE("masked lesion gradients are exactly zero") {
  Eigen::RowVectorXd probs(6);
  probs << 0.3, 0.6, 0.4, 0.2, 0.9, 0.5;
  LossConfig cfg;
  const Eigen::RowVectorXd g = loss_logit_gradient(probs, 0, std::nullopt, cfg);
  for (int i = 1; i < 6; ++i) CHECK(g[i] == 0.0);
  CHECK(g[0] == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("clamped probabilities stop gradient flow") {
  LossConfig cfg;
  CHECK(bce_logit_gradient(1e-9, 1, cfg.epsilon_clamp) == 0.0);
  CHECK(bce_logit_gradient(1.0 - 1e-9, 0, cfg.epsilon_clamp) == 0.0);
  CHECK(bce_logit_gradient(0.5, 1, cfg.epsilon_clamp) == -0.5);
}

TEST_CASE("loss config validation") {
  LossConfig cfg;
  cfg.alpha = -0.1;
  CHECK_THROWS(cfg.validate());
  cfg = LossConfig{};
  cfg.epsilon_clamp = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = LossConfig{};
  Eigen::RowVectorXd short_probs(3);
  short_probs << 0.5, 0.5, 0.5;
  CHECK_THROWS(total_loss(short_probs, 1, std::nullopt, cfg));
}

namespace {

// Scalar Adam recurrence replayed in plain vectors, independent of the
// vectorized implementation.
struct ScalarAdam {
  std::vector<double> m, v, p;
  long long t = 0;

  void step(const std::vector<double>& g, const OptimizerConfig& cfg) {
    ++t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      p[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
  }
};

}  // namespace

TEST_CASE("adam matches the scalar recurrence over several steps") {
  ModelConfig cfg;
  cfg.block_channels = {{2}, {3}};
  cfg.pool_output = 2;
  ModelParams<double> params = init_params<double>(cfg, 3);
  AdamState<double> state = make_adam_state<double>(cfg);
  OptimizerConfig opt;
  opt.learning_rate = 1e-2;

  // Mirror of every coefficient, flattened in the fixed array order.
  ScalarAdam ref;
  for (const auto* a : array_pointers(std::as_const(params)))
    for (Eigen::Index i = 0; i < a->size(); ++i) ref.p.push_back(a->data()[i]);
  ref.m.assign(ref.p.size(), 0.0);
  ref.v.assign(ref.p.size(), 0.0);

  Rng rng(9);
  ModelParams<double> grads = make_params<double>(cfg);
  for (int step = 0; step < 5; ++step) {
    std::vector<double> flat_g;
    for (auto* g : array_pointers(grads))
      for (Eigen::Index i = 0; i < g->size(); ++i) {
        g->data()[i] = rng.uniform(-1.0, 1.0);
        flat_g.push_back(g->data()[i]);
      }
    adam_step(params, grads, state, opt);
    ref.step(flat_g, opt);

    std::size_t q = 0;
    double worst = 0.0;
    for (const auto* a : array_pointers(std::as_const(params)))
      for (Eigen::Index i = 0; i < a->size(); ++i)
        worst = std::max(worst, std::abs(a->data()[i] - ref.p[q++]));
    CHECK(worst < 1e-14);
  }
  CHECK(state.t == 5);
}

TEST_CASE("first adam step moves each coefficient by about the learning rate") {
  // With bias correction the very first update is lr * g / (|g| + eps').
  ModelConfig cfg;
  cfg.block_channels = {{1}};
  cfg.pool_output = 1;
  ModelParams<float> params = make_params<float>(cfg);
  ModelParams<float> grads = make_params<float>(cfg);
  grads.fc_bias.setConstant(0.25f);
  AdamState<float> state = make_adam_state<float>(cfg);
  OptimizerConfig opt;
  opt.learning_rate = 1e-3;
  adam_step(params, grads, state, opt);
  CHECK(params.fc_bias(0, 0) == doctest::Approx(-1e-3).epsilon(1e-3));
  CHECK(params.trunk[0][0].weight.cwiseAbs().maxCoeff() == 0.0f);  // zero grad, no motion
}

TEST_CASE("optimizer config validation") {
  OptimizerConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = OptimizerConfig{};
  cfg.beta1 = 1.0;
  CHECK_THROWS(cfg.validate());
}
