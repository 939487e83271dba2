#include "doctest.h"

#include <cmath>
#include <vector>

#include "amddx/loss.hpp"
#include "amddx/model.hpp"
#include "amddx/rng.hpp"

using namespace amddx;

namespace {

struct GradProblem {
  ModelConfig cfg;
  LossConfig loss;
  ModelParams<double> params;
  Tensor<double> image;
  int diagnosis = 1;
  std::optional<LesionLabels> lesions;
};

double loss_value(const GradProblem& p, ForwardTrace<double>& trace) {
  const RowVectorX<double> probs = model_forward(p.params, p.cfg, p.image, &trace);
  return total_loss(probs, p.diagnosis, p.lesions, p.loss).total;
}

// Relu signs and pooling selections; finite differences only estimate a
// derivative while these are constant across the probe interval.
bool same_pattern(const ForwardTrace<double>& a, const ForwardTrace<double>& b) {
  for (std::size_t blk = 0; blk < a.conv_out.size(); ++blk)
    for (std::size_t c = 0; c < a.conv_out[blk].size(); ++c)
      if (((a.conv_out[blk][c].data.array() > 0.0) != (b.conv_out[blk][c].data.array() > 0.0)).any())
        return false;
  if (((a.maps.data.array() > 0.0) != (b.maps.data.array() > 0.0)).any()) return false;
  for (std::size_t i = 0; i < a.pool_argmax.size(); ++i)
    if ((a.pool_argmax[i].array() != b.pool_argmax[i].array()).any()) return false;
  return (a.map_argmax.array() == b.map_argmax.array()).all();
}

ModelParams<double> analytic_gradients(const GradProblem& p) {
  ForwardTrace<double> trace;
  model_forward(p.params, p.cfg, p.image, &trace);
  const Eigen::RowVectorXd dlogits =
      loss_logit_gradient(trace.probs, p.diagnosis, p.lesions, p.loss);
  ModelParams<double> grads = make_params<double>(p.cfg);
  model_backward(p.params, p.cfg, trace, dlogits, grads);
  return grads;
}

// Central finite differences on `coords` random parameter coordinates.
// Returns the worst relative error against the analytic gradient. Draws that
// straddle a relu or pooling switch are redrawn.
double max_fd_error(GradProblem& p, int coords, std::uint64_t seed, double step = 1e-4) {
  const ModelParams<double> grads = analytic_gradients(p);
  auto arrays = array_pointers(p.params);
  auto grad_arrays = array_pointers(const_cast<const ModelParams<double>&>(grads));

  Eigen::Index total = 0;
  for (const auto* a : grad_arrays) total += a->size();

  ForwardTrace<double> base, plus, minus;
  loss_value(p, base);

  Rng rng(seed);
  double worst = 0.0;
  int accepted = 0;
  for (int draw = 0; draw < 40 * coords && accepted < coords; ++draw) {
    Eigen::Index flat = rng.uniform_int(0, total - 1);
    std::size_t arr = 0;
    while (flat >= arrays[arr]->size()) flat -= arrays[arr++]->size();

    double& coeff = arrays[arr]->data()[flat];
    const double saved = coeff;
    coeff = saved + step;
    const double up = loss_value(p, plus);
    coeff = saved - step;
    const double down = loss_value(p, minus);
    coeff = saved;
    if (!same_pattern(plus, base) || !same_pattern(minus, base)) continue;
    ++accepted;

    const double fd = (up - down) / (2.0 * step);
    const double an = grad_arrays[arr]->data()[flat];
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
    worst = std::max(worst, std::abs(fd - an) / denom);
  }
  REQUIRE(accepted == coords);
  return worst;
}

GradProblem tiny_problem(std::uint64_t param_seed, std::uint64_t image_seed) {
  GradProblem p;
  p.cfg.block_channels = {{4, 4}, {8, 8}};
  p.cfg.pool_output = 7;  // keeps the fc array from dominating the coordinate draw
  p.params = init_params<double>(p.cfg, param_seed);
  p.image = Tensor<double>(32, 32, 3, 0);
  Rng rng(image_seed);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) p.image.at(c, y, x) = rng.uniform();
  return p;
}

}  // namespace

TEST_CASE("analytic gradients match finite differences with lesion labels") {
  GradProblem p = tiny_problem(7, 8);
  p.diagnosis = 1;
  p.lesions = LesionLabels{1, 0, 1, 0, 1};
  CHECK(max_fd_error(p, 40, 1) < 1e-4);
}

TEST_CASE("analytic gradients match finite differences without lesion labels") {
  GradProblem p = tiny_problem(17, 18);
  p.diagnosis = 0;
  p.lesions.reset();  // masked: lesion logits must carry exactly zero gradient
  CHECK(max_fd_error(p, 30, 2) < 1e-4);

  p.loss.unlabeled_policy = LossConfig::UnlabeledPolicy::negative;
  CHECK(max_fd_error(p, 30, 3) < 1e-4);
}

TEST_CASE("analytic gradients match finite differences in diagnosis-only mode") {
  GradProblem p = tiny_problem(27, 28);
  p.diagnosis = 1;
  p.lesions = LesionLabels{0, 1, 0, 0, 0};
  p.loss.alpha = 0.0;
  CHECK(max_fd_error(p, 30, 4) < 1e-4);
}

TEST_CASE("masked lesion labels zero the head lesion gradients") {
  GradProblem with = tiny_problem(37, 38);
  with.diagnosis = 1;
  with.lesions = LesionLabels{1, 1, 0, 0, 1};
  GradProblem without = with;
  without.lesions.reset();

  const ModelParams<double> g_masked = analytic_gradients(without);

  GradProblem amd_only = with;
  amd_only.loss.alpha = 0.0;
  const ModelParams<double> g_ao = analytic_gradients(amd_only);

  // A masked sample and an alpha=0 sample produce identical gradients
  // everywhere (both reduce to the pure diagnosis objective).
  auto a = array_pointers(const_cast<const ModelParams<double>&>(g_masked));
  auto b = array_pointers(const_cast<const ModelParams<double>&>(g_ao));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, (*a[i] - *b[i]).cwiseAbs().maxCoeff());
  CHECK(worst < 1e-12);

  // And the fc columns feeding the lesion logits get zero gradient.
  const ModelParams<double> g = g_masked;
  for (int col = 1; col <= 5; ++col) CHECK(g.fc_weight.col(col).cwiseAbs().maxCoeff() == 0.0);
}
