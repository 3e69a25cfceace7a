#pragma once

#include <cstdint>

#include "tailgan/nn/dense_net.hpp"

namespace tailgan::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  Vector first_moment;
  Vector second_moment;

  static AdamState zeros(std::size_t parameter_count, AdamConfig config);
};

enum class StepStatus { applied, rejected_non_finite };

// Bias-corrected Adam update. A non-finite gradient leaves both the
// parameters and the state untouched and is reported as rejected.
StepStatus adam_step(AdamState& state, Vector& params, const Vector& grads);

// Rescales grads in place so that ||grads||_2 <= max_norm; returns the norm
// before clipping.
double clip_global_norm(Vector& grads, double max_norm);

// Clip, step and write the parameters back into the network.
StepStatus apply_update(DenseNet& net, AdamState& state, Vector grads, double max_norm);

}  // namespace tailgan::nn
