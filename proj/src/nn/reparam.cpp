#include "tailgan/nn/reparam.hpp"

#include <cmath>

#include "tailgan/errors.hpp"

namespace tailgan::nn {

ReparamSample gpd_reparam_sample(const GpdParams& params, std::span<const double> uniforms) {
  validate(params);
  const double xi = params.shape;
  const double beta = params.scale;
  ReparamSample out;
  out.values.reserve(uniforms.size());
  out.d_shape.reserve(uniforms.size());
  out.d_scale.reserve(uniforms.size());
  for (const double u : uniforms) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("reparameterized sampling needs U in (0, 1)");
    const double a = -std::log1p(-u);  // -ln(1 - U) > 0
    double z = 0.0;
    double dz_dxi = 0.0;
    if (std::abs(xi) < kShapeEpsilon) {
      z = beta * a * (1.0 + 0.5 * xi * a);
      dz_dxi = beta * a * a * (0.5 + xi * a / 3.0);
    } else {
      const double em1 = std::expm1(xi * a);
      z = beta * em1 / xi;
      dz_dxi = beta / (xi * xi) * (xi * a * (em1 + 1.0) - em1);
    }
    out.values.push_back(z);
    out.d_shape.push_back(dz_dxi);
    out.d_scale.push_back(z / beta);
  }
  return out;
}

}  // namespace tailgan::nn
