#pragma once

// Reference computations written independently of the library, used as
// ground truth by the unit, property and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

// Closed-form GPD CDF in long double, xi == 0 handled as the exponential law.
inline long double gpd_cdf(long double z, long double xi, long double beta) {
  if (z <= 0.0L) return 0.0L;
  if (xi == 0.0L) return -std::expm1(-z / beta);
  const long double base = 1.0L + xi * z / beta;
  if (base <= 0.0L) return 1.0L;
  return 1.0L - std::pow(base, -1.0L / xi);
}

inline long double gpd_pdf(long double z, long double xi, long double beta) {
  if (z < 0.0L) return 0.0L;
  if (xi == 0.0L) return std::exp(-z / beta) / beta;
  const long double base = 1.0L + xi * z / beta;
  if (base <= 0.0L) return 0.0L;
  return std::pow(base, -1.0L / xi - 1.0L) / beta;
}

inline long double gpd_quantile(long double p, long double xi, long double beta) {
  if (xi == 0.0L) return -beta * std::log1p(-p);
  return beta / xi * (std::pow(1.0L - p, -xi) - 1.0L);
}

// Adaptive Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 48) {
  const auto step = [&](auto&& self, double lo, double hi, double flo, double fmid, double fhi, double whole,
                        double eps, int level) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid);
    const double rm = 0.5 * (mid + hi);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    const double delta = left + right - whole;
    if (level <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return self(self, lo, mid, flo, flm, fmid, left, 0.5 * eps, level - 1) +
           self(self, mid, hi, fmid, frm, fhi, right, 0.5 * eps, level - 1);
  };
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return step(step, a, b, fa, fm, fb, whole, tol, depth);
}

// Integral of a density over [0, inf) through z = t / (1 - t).
inline double integrate_half_line(const std::function<double(double)>& density, double tol = 1e-10) {
  const auto g = [&](double t) {
    if (t >= 1.0) return 0.0;
    const double one_minus = 1.0 - t;
    return density(t / one_minus) / (one_minus * one_minus);
  };
  return simpson(g, 0.0, 1.0 - 1e-12, tol);
}

// Linear interpolation between order statistics at h = (n - 1) p.
inline double quantile_linear(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// One-sample KS by direct evaluation of both empirical CDF limits at every point.
inline double ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double c = cdf(sample[i]);
    worst = std::max({worst, std::abs(static_cast<double>(i + 1) / n - c), std::abs(c - static_cast<double>(i) / n)});
  }
  return worst;
}

// Two-sample KS: maximum ECDF gap evaluated at every pooled point.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  double worst = 0.0;
  for (const double x : pooled) {
    const double fa = static_cast<double>(std::upper_bound(a.begin(), a.end(), x) - a.begin()) / a.size();
    const double fb = static_cast<double>(std::upper_bound(b.begin(), b.end(), x) - b.begin()) / b.size();
    worst = std::max(worst, std::abs(fa - fb));
  }
  return worst;
}

inline double mean(std::span<const double> v) {
  long double s = 0.0L;
  for (const double x : v) s += x;
  return static_cast<double>(s / v.size());
}

// Population variance.
inline double variance(std::span<const double> v) {
  const double m = mean(v);
  long double s = 0.0L;
  for (const double x : v) s += (x - m) * (x - m);
  return static_cast<double>(s / v.size());
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x);
  const double my = mean(y);
  long double sxy = 0.0L, sxx = 0.0L, syy = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// Method-of-moments GPD with the unbiased variance: xi = (1 - m^2/s^2)/2, beta = m (1 - xi).
inline std::pair<double, double> gpd_moments(std::span<const double> z) {
  const double m = mean(z);
  const double s2 = variance(z) * static_cast<double>(z.size()) / static_cast<double>(z.size() - 1);
  const double xi = 0.5 * (1.0 - m * m / s2);
  return {xi, m * (1.0 - xi)};
}

// Runs declustering from the definition: a new cluster starts whenever the
// index gap exceeds r; each cluster keeps its largest deficit, earliest on ties.
inline std::vector<std::pair<std::size_t, double>> decluster(const std::vector<std::size_t>& idx,
                                                             const std::vector<double>& z, std::size_t r) {
  std::vector<std::pair<std::size_t, double>> out;
  if (r == 0) {
    for (std::size_t i = 0; i < idx.size(); ++i) out.emplace_back(idx[i], z[i]);
    return out;
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i == 0 || idx[i] - idx[i - 1] > r) {
      out.emplace_back(idx[i], z[i]);
    } else if (z[i] > out.back().second) {
      out.back() = {idx[i], z[i]};
    }
  }
  return out;
}

inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

// Binary cross entropy of one logit, directly from the definition in long double.
inline double bce(double logit, double label) {
  const long double s = 1.0L / (1.0L + std::exp(-static_cast<long double>(logit)));
  return static_cast<double>(-(label * std::log(s) + (1.0L - label) * std::log1p(-s)));
}

inline double softplus(double x) { return static_cast<double>(std::log1p(std::exp(static_cast<long double>(x)))); }

// Central difference of a scalar function along direction v at step h.
template <typename F, typename Vec>
double directional_difference(F&& f, const Vec& x, const Vec& v, double h) {
  return (f(x + h * v) - f(x - h * v)) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace oracle
