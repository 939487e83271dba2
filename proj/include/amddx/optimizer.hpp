#pragma once

#include <cmath>
#include <stdexcept>

#include "amddx/model.hpp"

namespace amddx {

struct OptimizerConfig {
  double learning_rate = 1e-6;  // constant for the whole run
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 200;

  void validate() const {
    if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be > 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
      throw std::invalid_argument("betas must be in [0, 1)");
    if (epsilon <= 0) throw std::invalid_argument("epsilon must be > 0");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  }
};

template <typename Scalar>
struct AdamState {
  ModelParams<Scalar> m;
  ModelParams<Scalar> v;
  long long t = 0;
};

template <typename Scalar>
AdamState<Scalar> make_adam_state(const ModelConfig& cfg) {
  return AdamState<Scalar>{make_params<Scalar>(cfg), make_params<Scalar>(cfg), 0};
}

// Standard Adam with bias correction, applied array by array in the fixed
// parameter order.
template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads,
               AdamState<Scalar>& state, const OptimizerConfig& cfg) {
  ++state.t;
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.t)));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.t)));
  const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
  const Scalar eps = static_cast<Scalar>(cfg.epsilon);

  auto ps = array_pointers(params);
  auto gs = array_pointers(grads);
  auto ms = array_pointers(state.m);
  auto vs = array_pointers(state.v);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto p = ps[i]->array();
    const auto g = gs[i]->array();
    auto m = ms[i]->array();
    auto v = vs[i]->array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

}  // namespace amddx
