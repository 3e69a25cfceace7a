#include "tailgan/gpd.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "tailgan/errors.hpp"
#include "tailgan/stats.hpp"

namespace tailgan {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Floor on 1 + xi z / beta below which the soft log-density is continued
// linearly in t.
constexpr double kSoftSupportFloor = 1e-4;

void check_deficit(double z) {
  if (!(z >= 0.0)) throw DomainError("deficit must be >= 0");
}

}  // namespace

void validate(const GpdParams& params) {
  if (!std::isfinite(params.shape) || !std::isfinite(params.scale) || !(params.scale > 0.0)) {
    throw DomainError("GPD parameters require finite shape and scale > 0");
  }
}

double gpd_upper_endpoint(const GpdParams& params) {
  validate(params);
  if (params.shape < 0.0 && std::abs(params.shape) >= kShapeEpsilon) {
    return params.scale / -params.shape;
  }
  return kInf;
}

double gpd_cdf(double z, const GpdParams& params) {
  validate(params);
  check_deficit(z);
  const double xi = params.shape;
  const double beta = params.scale;
  if (std::abs(xi) < kShapeEpsilon) return -std::expm1(-z / beta);
  const double t = xi * z / beta;
  if (t <= -1.0) return 1.0;  // at or beyond the upper endpoint (xi < 0)
  return -std::expm1(-std::log1p(t) / xi);
}

double gpd_log_pdf(double z, const GpdParams& params, SupportPolicy policy) {
  validate(params);
  check_deficit(z);
  const double xi = params.shape;
  const double beta = params.scale;
  if (std::abs(xi) < kShapeEpsilon) return -std::log(beta) - z / beta;
  const double t = xi * z / beta;
  if (t <= -1.0) {
    if (policy == SupportPolicy::raise) throw DomainError("deficit outside the GPD support");
    return -kInf;
  }
  return -std::log(beta) - (1.0 / xi + 1.0) * std::log1p(t);
}

double gpd_quantile(double p, const GpdParams& params) {
  validate(params);
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("quantile level must lie in [0, 1)");
  const double xi = params.shape;
  const double beta = params.scale;
  const double log_survival = std::log1p(-p);
  if (std::abs(xi) < kShapeEpsilon) return -beta * log_survival;
  return beta / xi * std::expm1(-xi * log_survival);
}

std::vector<double> gpd_sample(std::size_t n, const GpdParams& params, Rng& rng) {
  validate(params);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(gpd_quantile(rng.uniform(), params));
  return out;
}

double gpd_nll(std::span<const double> deficits, const GpdParams& params) {
  double nll = 0.0;
  for (const double z : deficits) nll -= gpd_log_pdf(z, params);
  return nll;
}

GpdLogDensity gpd_log_pdf_soft(double z, const GpdParams& params) {
  validate(params);
  const double xi = params.shape;
  const double beta = params.scale;
  const double x = z / beta;
  GpdLogDensity out;
  if (std::abs(xi) < kShapeEpsilon) {
    // First-order expansion in xi of the exact expressions.
    out.value = -std::log(beta) - x - xi * (x - 0.5 * x * x);
    out.d_deficit = -(1.0 + xi) / beta;
    out.d_shape = 0.5 * x * x - x + xi * (x * x - 2.0 * x * x * x / 3.0);
    out.d_scale = -1.0 / beta + (1.0 + xi) * z / (beta * beta);
    return out;
  }
  const double t = 1.0 + xi * x;
  double log_t = 0.0;
  double d_log_t = 0.0;
  if (t >= kSoftSupportFloor) {
    log_t = std::log(t);
    d_log_t = 1.0 / t;
  } else {
    log_t = std::log(kSoftSupportFloor) + (t - kSoftSupportFloor) / kSoftSupportFloor;
    d_log_t = 1.0 / kSoftSupportFloor;
  }
  const double k = 1.0 / xi + 1.0;
  out.value = -std::log(beta) - k * log_t;
  out.d_deficit = -k * d_log_t * xi / beta;
  out.d_shape = log_t / (xi * xi) - k * d_log_t * x;
  out.d_scale = -1.0 / beta + k * d_log_t * xi * z / (beta * beta);
  return out;
}

GpdParams fit_gpd_moments(std::span<const double> deficits) {
  if (deficits.size() < 5) throw FitError("moment fit needs at least 5 deficits", deficits.size());
  const double m = stats::mean(deficits);
  const double s2 = stats::sample_variance(deficits);
  if (!(s2 > 0.0) || !std::isfinite(s2)) {
    throw FitError("moment fit needs positive sample variance", deficits.size());
  }
  const double xi = std::clamp(0.5 * (1.0 - m * m / s2), -0.49, 0.49);
  const double beta = std::max(m * (1.0 - xi), 1e-6);
  return {xi, beta};
}

namespace {

constexpr double kShapeBox = 1.0 - 1e-6;

// NLL and gradient in (xi, eta = log beta).
struct Objective {
  std::span<const double> z;

  double operator()(const std::array<double, 2>& p, std::array<double, 2>* grad) const {
    const double xi = p[0];
    const double eta = p[1];
    if (!(std::abs(xi) < kShapeBox) || !std::isfinite(eta)) return kInf;
    const double inv_beta = std::exp(-eta);
    const double n = static_cast<double>(z.size());
    double f = n * eta;
    double g_xi = 0.0;
    double g_eta = n;
    if (std::abs(xi) < kShapeEpsilon) {
      for (const double zi : z) {
        const double x = zi * inv_beta;
        f += x + xi * (x - 0.5 * x * x);
        g_xi += x - 0.5 * x * x;
        g_eta -= (1.0 + xi) * x;
      }
    } else {
      const double k = 1.0 / xi + 1.0;
      for (const double zi : z) {
        const double x = zi * inv_beta;
        const double t = 1.0 + xi * x;
        if (!(t > 0.0)) return kInf;
        const double l = std::log1p(xi * x);
        f += k * l;
        g_xi += -l / (xi * xi) + k * x / t;
        g_eta -= (1.0 + xi) * x / t;
      }
    }
    if (grad != nullptr) *grad = {g_xi, g_eta};
    return f;
  }
};

struct LocalResult {
  std::array<double, 2> point;
  double value;
  std::size_t iterations;
  bool stalled;
};

LocalResult quasi_newton(const Objective& objective, std::array<double, 2> x) {
  std::array<double, 2> g{};
  double f = objective(x, &g);
  // Inverse Hessian approximation.
  std::array<double, 4> h{1.0, 0.0, 0.0, 1.0};
  std::size_t iter = 0;
  for (; iter < 500; ++iter) {
    const double gnorm = std::hypot(g[0], g[1]);
    if (gnorm < 1e-9 * static_cast<double>(objective.z.size())) return {x, f, iter, false};

    std::array<double, 2> d{-(h[0] * g[0] + h[1] * g[1]), -(h[2] * g[0] + h[3] * g[1])};
    double slope = d[0] * g[0] + d[1] * g[1];
    if (!(slope < 0.0)) {
      h = {1.0, 0.0, 0.0, 1.0};
      d = {-g[0], -g[1]};
      slope = -(g[0] * g[0] + g[1] * g[1]);
    }
    double step = 1.0;
    if (std::abs(d[0]) > 0.0) {
      const double room = d[0] > 0.0 ? kShapeBox - x[0] : x[0] + kShapeBox;
      step = std::min(step, 0.99 * room / std::abs(d[0]));
    }
    std::array<double, 2> x_new{};
    std::array<double, 2> g_new{};
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = {x[0] + step * d[0], x[1] + step * d[1]};
      f_new = objective(x_new, &g_new);
      if (f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return {x, f, iter, true};

    const std::array<double, 2> s{x_new[0] - x[0], x_new[1] - x[1]};
    const std::array<double, 2> y{g_new[0] - g[0], g_new[1] - g[1]};
    const double sy = s[0] * y[0] + s[1] * y[1];
    const double improvement = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    if (sy > 1e-14) {
      // BFGS update of the inverse Hessian.
      const std::array<double, 2> hy{h[0] * y[0] + h[1] * y[1], h[2] * y[0] + h[3] * y[1]};
      const double yhy = y[0] * hy[0] + y[1] * hy[1];
      const double rho = 1.0 / sy;
      const double c = (1.0 + yhy * rho) * rho;
      h[0] += c * s[0] * s[0] - rho * (hy[0] * s[0] + s[0] * hy[0]);
      h[1] += c * s[0] * s[1] - rho * (hy[0] * s[1] + s[0] * hy[1]);
      h[2] += c * s[1] * s[0] - rho * (hy[1] * s[0] + s[1] * hy[0]);
      h[3] += c * s[1] * s[1] - rho * (hy[1] * s[1] + s[1] * hy[1]);
    }
    if (improvement >= 0.0 && improvement < 1e-13 * (1.0 + std::abs(f)) &&
        std::hypot(s[0], s[1]) < 1e-10) {
      return {x, f, iter + 1, false};
    }
  }
  return {x, f, iter, false};
}

LocalResult grid_search(const Objective& objective, double lo_scale, double hi_scale) {
  constexpr int kSide = 200;
  LocalResult best{{0.0, 0.0}, kInf, 0, false};
  const double log_lo = std::log(lo_scale);
  const double log_hi = std::log(hi_scale);
  for (int i = 0; i < kSide; ++i) {
    const double xi = -kShapeBox + 2.0 * kShapeBox * (i + 0.5) / kSide;
    for (int j = 0; j < kSide; ++j) {
      const double eta = log_lo + (log_hi - log_lo) * j / (kSide - 1);
      const double f = objective({xi, eta}, nullptr);
      if (f < best.value) best = {{xi, eta}, f, 0, false};
    }
  }
  return best;
}

}  // namespace

MleFit fit_gpd_mle(std::span<const double> deficits) {
  const std::size_t n = deficits.size();
  if (n < 5) throw FitError("maximum likelihood fit needs at least 5 deficits", n);
  double max_z = 0.0;
  for (const double z : deficits) {
    if (!(z >= 0.0) || !std::isfinite(z)) throw FitError("deficits must be finite and >= 0", n);
    max_z = std::max(max_z, z);
  }
  const auto [lo, hi] = std::minmax_element(deficits.begin(), deficits.end());
  if (*lo == *hi) throw FitError("maximum likelihood fit needs non-identical deficits", n);

  const Objective objective{deficits};
  GpdParams start = fit_gpd_moments(deficits);
  MleFit result;
  result.start_nll = objective({start.shape, std::log(start.scale)}, nullptr);
  if (!std::isfinite(result.start_nll)) {
    // Moments start violates the support; restart from the exponential fit.
    start = {0.0, stats::mean(deficits)};
  }

  LocalResult local = quasi_newton(objective, {start.shape, std::log(start.scale)});
  if (local.stalled) {
    const double m = stats::mean(deficits);
    LocalResult grid = grid_search(objective, m * 1e-2, std::max(max_z, m) * 1e1);
    LocalResult refined = quasi_newton(objective, grid.point);
    if (refined.value < grid.value) grid = refined;
    result.used_grid = true;
    if (grid.value < local.value) local = grid;
  }
  result.params = {local.point[0], std::exp(local.point[1])};
  result.nll = local.value;
  result.iterations = local.iterations;
  if (!std::isfinite(result.nll)) throw FitError("maximum likelihood fit failed", n);
  return result;
}

}  // namespace tailgan
