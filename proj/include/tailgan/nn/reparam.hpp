#pragma once

#include <span>
#include <vector>

#include "tailgan/gpd.hpp"

namespace tailgan::nn {

// Pathwise GPD draws z = (beta / xi)((1 - U)^(-xi) - 1) with their partial
// derivatives with respect to the parameters, so gradients can flow from a
// discriminator back into whatever produced (xi, beta).
struct ReparamSample {
  std::vector<double> values;
  std::vector<double> d_shape;
  std::vector<double> d_scale;
};

// uniforms must lie strictly inside (0, 1).
ReparamSample gpd_reparam_sample(const GpdParams& params, std::span<const double> uniforms);

}  // namespace tailgan::nn
