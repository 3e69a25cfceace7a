#include "tailgan/nn/adam.hpp"

#include <cmath>

#include "tailgan/errors.hpp"

namespace tailgan::nn {

AdamState AdamState::zeros(std::size_t parameter_count, AdamConfig config) {
  const auto n = static_cast<Eigen::Index>(parameter_count);
  return {config, 0, Vector::Zero(n), Vector::Zero(n)};
}

StepStatus adam_step(AdamState& state, Vector& params, const Vector& grads) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw DimensionError("Adam state, parameters and gradients must have equal length");
  }
  if (!grads.allFinite()) return StepStatus::rejected_non_finite;

  const AdamConfig& c = state.config;
  ++state.step;
  state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grads;
  state.second_moment = c.beta2 * state.second_moment + (1.0 - c.beta2) * grads.cwiseProduct(grads);
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  params.array() -= c.learning_rate * (state.first_moment.array() / correction1) /
                    ((state.second_moment.array() / correction2).sqrt() + c.epsilon);
  return StepStatus::applied;
}

double clip_global_norm(Vector& grads, double max_norm) {
  const double norm = grads.norm();
  if (std::isfinite(norm) && norm > max_norm && max_norm > 0.0) grads *= max_norm / norm;
  return norm;
}

StepStatus apply_update(DenseNet& net, AdamState& state, Vector grads, double max_norm) {
  clip_global_norm(grads, max_norm);
  Vector params = net.parameters();
  const StepStatus status = adam_step(state, params, grads);
  if (status == StepStatus::applied) net.set_parameters(params);
  return status;
}

}  // namespace tailgan::nn
