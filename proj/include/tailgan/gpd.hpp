#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tailgan/random.hpp"

namespace tailgan {

// Below this |shape| every formula switches to its exponential limit.
inline constexpr double kShapeEpsilon = 1e-6;

// Generalized Pareto parameters for lower-tail deficits z = u - y >= 0.
struct GpdParams {
  double shape = 0.0;  // xi, dimensionless
  double scale = 1.0;  // beta > 0, same units as the deficits (dB)

  friend bool operator==(const GpdParams&, const GpdParams&) = default;
};

// Throws DomainError unless scale > 0 and both values are finite.
void validate(const GpdParams& params);

// Upper end of the support: beta / |xi| for xi < 0, +inf otherwise.
double gpd_upper_endpoint(const GpdParams& params);

// G(z) = 1 - (1 + xi z / beta)^(-1/xi); exactly 1 at or beyond the upper
// endpoint when xi < 0.
double gpd_cdf(double z, const GpdParams& params);

enum class SupportPolicy {
  sentinel,  // return -inf outside the support
  raise,     // throw DomainError outside the support
};

double gpd_log_pdf(double z, const GpdParams& params,
                   SupportPolicy policy = SupportPolicy::sentinel);

// Inverse of gpd_cdf for p in [0, 1).
double gpd_quantile(double p, const GpdParams& params);

// n i.i.d. draws by inverse-CDF transform of uniforms.
std::vector<double> gpd_sample(std::size_t n, const GpdParams& params, Rng& rng);

// Negative log-likelihood; +inf when any deficit lies outside the support.
double gpd_nll(std::span<const double> deficits, const GpdParams& params);

// Log-density together with its partial derivatives, for use inside training
// losses. Outside the support (1 + xi z / beta below a small floor) the
// logarithm is continued linearly so the value stays finite and the gradient
// points back into the support.
struct GpdLogDensity {
  double value = 0.0;
  double d_deficit = 0.0;
  double d_shape = 0.0;
  double d_scale = 0.0;
};
GpdLogDensity gpd_log_pdf_soft(double z, const GpdParams& params);

// Method-of-moments fit: xi = (1 - m^2 / s^2) / 2, beta = m (1 - xi), with xi
// clamped to [-0.49, 0.49] and beta floored at 1e-6.
GpdParams fit_gpd_moments(std::span<const double> deficits);

struct MleFit {
  GpdParams params;
  double nll = 0.0;
  double start_nll = 0.0;  // NLL at the method-of-moments start
  std::size_t iterations = 0;
  bool used_grid = false;
};

// Maximum likelihood over xi in (-1, 1), beta > 0. Quasi-Newton on
// (xi, log beta) from the moments start; a 200 x 200 grid takes over when the
// line search stalls.
MleFit fit_gpd_mle(std::span<const double> deficits);

}  // namespace tailgan
