#include <cmath>
#include <limits>
#include <vector>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "tailgan/errors.hpp"
#include "tailgan/exceedance.hpp"
#include "tailgan/gpd.hpp"
#include "tailgan/series.hpp"
#include "tailgan/stats.hpp"
#include "tailgan/tail_model.hpp"

using namespace tailgan;
using doctest::Approx;

TEST_CASE("gpd_cdf closed-form values") {
  CHECK(gpd_cdf(0.0, {0.3, 2.0}) == 0.0);
  CHECK(gpd_cdf(1.0, {0.5, 1.0}) == Approx(1.0 - std::pow(1.5, -2.0)).epsilon(1e-15));
  CHECK(gpd_cdf(2.0, {0.0, 1.0}) == Approx(1.0 - std::exp(-2.0)).epsilon(1e-15));
  // Exactly one at and beyond the upper endpoint of a bounded tail.
  CHECK(gpd_cdf(2.0, {-0.5, 1.0}) == 1.0);
  CHECK(gpd_cdf(7.0, {-0.5, 1.0}) == 1.0);
  CHECK_THROWS_AS(gpd_cdf(-1e-9, {0.1, 1.0}), DomainError);
  CHECK_THROWS_AS(gpd_cdf(1.0, {0.1, 0.0}), DomainError);
  CHECK_THROWS_AS(gpd_cdf(1.0, {std::numeric_limits<double>::quiet_NaN(), 1.0}), DomainError);
}

TEST_CASE("gpd_cdf agrees with the long-double oracle across shapes") {
  for (const double xi : {-0.45, -0.2, -1e-3, 0.0, 1e-3, 0.2, 0.45, 0.9}) {
    for (const double beta : {0.1, 1.0, 7.5}) {
      for (const double z : {1e-8, 0.01, 0.5, 1.0, 3.0, 20.0}) {
        const double expected = static_cast<double>(oracle::gpd_cdf(z, xi, beta));
        CHECK(gpd_cdf(z, {xi, beta}) == Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("near-zero shape switches smoothly to the exponential limit") {
  const double z = 1.3;
  const double exp_limit = 1.0 - std::exp(-z);
  CHECK(gpd_cdf(z, {5e-7, 1.0}) == Approx(exp_limit).epsilon(1e-6));
  CHECK(gpd_cdf(z, {-5e-7, 1.0}) == Approx(exp_limit).epsilon(1e-6));
  CHECK(gpd_quantile(0.7, {5e-7, 2.0}) == Approx(-2.0 * std::log(0.3)).epsilon(1e-6));
}

TEST_CASE("gpd_log_pdf values and support policy") {
  CHECK(gpd_log_pdf(0.0, {0.5, 2.0}) == Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(gpd_log_pdf(3.0, {0.0, 1.5}) == Approx(-std::log(1.5) - 2.0).epsilon(1e-15));
  CHECK(gpd_log_pdf(10.0, {-0.5, 1.0}) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(gpd_log_pdf(10.0, {-0.5, 1.0}, SupportPolicy::raise), DomainError);
  for (const double xi : {-0.3, 0.0, 0.4}) {
    for (const double z : {0.0, 0.3, 2.0}) {
      CHECK(std::exp(gpd_log_pdf(z, {xi, 1.2})) == Approx(static_cast<double>(oracle::gpd_pdf(z, xi, 1.2))).epsilon(1e-12));
    }
  }
}

TEST_CASE("gpd_quantile inverts the closed-form examples") {
  CHECK(gpd_quantile(0.0, {0.3, 4.0}) == 0.0);
  CHECK(gpd_quantile(1.0 - std::pow(1.5, -2.0), {0.5, 1.0}) == Approx(1.0).epsilon(1e-14));
  CHECK(gpd_quantile(1.0 - std::exp(-2.0), {0.0, 1.0}) == Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(gpd_quantile(1.0, {0.1, 1.0}), DomainError);
  CHECK_THROWS_AS(gpd_quantile(-0.1, {0.1, 1.0}), DomainError);
  CHECK(gpd_upper_endpoint({-0.25, 2.0}) == Approx(8.0));
  CHECK(std::isinf(gpd_upper_endpoint({0.0, 2.0})));
}

TEST_CASE("gpd_sample edge cases") {
  Rng rng(1);
  CHECK(gpd_sample(0, {0.2, 1.0}, rng).empty());
  const auto bounded = gpd_sample(100'000, {-0.3, 2.0}, rng);
  for (const double z : bounded) {
    REQUIRE(z >= 0.0);
    REQUIRE(z < 2.0 / 0.3);
  }
  Rng a(42), b(42);
  CHECK(gpd_sample(1000, {0.1, 1.0}, a) == gpd_sample(1000, {0.1, 1.0}, b));
}

TEST_CASE("gpd_log_pdf_soft matches the density inside the support") {
  const GpdParams p{0.25, 1.5};
  for (const double z : {0.0, 0.4, 3.0}) {
    const GpdLogDensity d = gpd_log_pdf_soft(z, p);
    CHECK(d.value == Approx(gpd_log_pdf(z, p)).epsilon(1e-13));
    const double h = 1e-6;
    CHECK(d.d_deficit == Approx((gpd_log_pdf(z + h, p) - gpd_log_pdf(z - (z > h ? h : 0.0), p)) / (z > h ? 2 * h : h)).epsilon(1e-4));
    CHECK(d.d_shape == Approx((gpd_log_pdf(z, {p.shape + h, p.scale}) - gpd_log_pdf(z, {p.shape - h, p.scale})) / (2 * h)).epsilon(1e-5));
    CHECK(d.d_scale == Approx((gpd_log_pdf(z, {p.shape, p.scale + h}) - gpd_log_pdf(z, {p.shape, p.scale - h})) / (2 * h)).epsilon(1e-5));
  }
  // Beyond the upper endpoint the value stays finite and the slope points back.
  const GpdLogDensity outside = gpd_log_pdf_soft(5.0, {-0.5, 1.0});
  CHECK(std::isfinite(outside.value));
  CHECK(outside.d_deficit < 0.0);
}

TEST_CASE("fit_gpd_moments formulas") {
  // Mean 1 and unbiased variance 1: deficits {0, 2} repeated... built to exact moments.
  const std::vector<double> exp_like = {0.0, 2.0, 0.0, 2.0, 1.0 - std::sqrt(0.5), 1.0 + std::sqrt(0.5)};
  const auto [xi_o, beta_o] = oracle::gpd_moments(exp_like);
  const GpdParams fit = fit_gpd_moments(exp_like);
  CHECK(fit.shape == Approx(xi_o).epsilon(1e-12));
  CHECK(fit.scale == Approx(beta_o).epsilon(1e-12));

  // m = 1, s^2 = 1 gives (0, 1); m = 1, s^2 = 2 gives (0.25, 0.75).
  const auto build = [](double m, double s2) {
    // Five points with the requested mean and unbiased variance.
    std::vector<double> base = {-2, -1, 0, 1, 2};
    const double scale = std::sqrt(s2 / 2.5);
    for (auto& x : base) x = m + scale * x;
    return base;
  };
  const GpdParams a = fit_gpd_moments(build(1.0, 1.0));
  CHECK(a.shape == Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(a.scale == Approx(1.0).epsilon(1e-12));
  const GpdParams b = fit_gpd_moments(build(1.0, 2.0));
  CHECK(b.shape == Approx(0.25).epsilon(1e-12));
  CHECK(b.scale == Approx(0.75).epsilon(1e-12));
  CHECK_THROWS_AS(fit_gpd_moments(std::vector<double>(10, 1.5)), FitError);
  CHECK_THROWS_AS(fit_gpd_moments(std::vector<double>{1, 2, 3}), FitError);
}

TEST_CASE("fit_gpd_mle recovers known parameters") {
  Rng rng(7);
  const auto heavy = gpd_sample(100'000, {0.2, 1.0}, rng);
  const MleFit fit = fit_gpd_mle(heavy);
  CHECK(fit.params.shape >= 0.18);
  CHECK(fit.params.shape <= 0.22);
  CHECK(fit.params.scale == Approx(1.0).epsilon(0.03));
  CHECK(fit.nll <= fit.start_nll);
  CHECK(fit.nll == Approx(gpd_nll(heavy, fit.params)).epsilon(1e-12));

  const auto expo = gpd_sample(100'000, {0.0, 2.0}, rng);
  CHECK(std::abs(fit_gpd_mle(expo).params.shape) <= 0.02);

  const auto small = gpd_sample(72, {0.1, 1.0}, rng);
  const MleFit s = fit_gpd_mle(small);
  CHECK(std::isfinite(s.params.shape));
  CHECK(s.params.scale > 0.0);
  CHECK(s.params.shape > -1.0);
  CHECK(s.params.shape < 1.0);

  CHECK_THROWS_AS(fit_gpd_mle(std::vector<double>{1, 2, 3, 4}), FitError);
  CHECK_THROWS_AS(fit_gpd_mle(std::vector<double>(20, 0.7)), FitError);
  CHECK_THROWS_AS(fit_gpd_mle(std::vector<double>{1, 2, 3, 4, -1}), FitError);
}

TEST_CASE("fit_gpd_mle error shrinks with sample size") {
  std::vector<double> small_err, large_err;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(derive_seed(seed, "consistency"));
    small_err.push_back(std::abs(fit_gpd_mle(gpd_sample(1000, {0.2, 1.0}, rng)).params.shape - 0.2));
    large_err.push_back(std::abs(fit_gpd_mle(gpd_sample(100'000, {0.2, 1.0}, rng)).params.shape - 0.2));
  }
  const double m_small = oracle::quantile_linear(small_err, 0.5);
  const double m_large = oracle::quantile_linear(large_err, 0.5);
  // Halving twice means at least a factor of four.
  CHECK(m_large * 4.0 <= m_small);
}

TEST_CASE("gpd_nll is infinite outside the support") {
  CHECK(std::isinf(gpd_nll(std::vector<double>{0.5, 3.0}, {-0.5, 1.0})));
  const std::vector<double> z = {0.1, 0.4, 1.1};
  double expected = 0.0;
  for (const double x : z) expected -= std::log(static_cast<double>(oracle::gpd_pdf(x, 0.1, 0.8)));
  CHECK(gpd_nll(z, {0.1, 0.8}) == Approx(expected).epsilon(1e-12));
}

TEST_CASE("extract_exceedances") {
  const std::vector<double> v = {5, 3, 7, 2};
  const ExceedanceSet e = extract_exceedances(v, 4.0);
  CHECK(e.deficits == std::vector<double>{1.0, 2.0});
  CHECK(e.source_indices == std::vector<std::size_t>{1, 3});
  CHECK(e.threshold == 4.0);
  CHECK(extract_exceedances(v, 2.0).empty());
  CHECK(extract_exceedances(v, 1.0).empty());
  CHECK_THROWS_AS(extract_exceedances(v, std::numeric_limits<double>::infinity()), DomainError);
  CHECK_THROWS_AS(extract_exceedances(v, std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("decluster_runs") {
  ExceedanceSet e;
  e.source_indices = {10, 11, 12, 50};
  e.deficits = {0.5, 2.0, 0.3, 1.0};
  const ExceedanceSet d = decluster_runs(e, 5);
  CHECK(d.source_indices == std::vector<std::size_t>{11, 50});
  CHECK(d.deficits == std::vector<double>{2.0, 1.0});
  const ExceedanceSet same = decluster_runs(e, 0);
  CHECK(same.deficits == e.deficits);
  CHECK(same.source_indices == e.source_indices);
  ExceedanceSet one;
  one.source_indices = {3};
  one.deficits = {0.2};
  CHECK(decluster_runs(one, 10).deficits == one.deficits);
  // Ties keep the earliest index.
  ExceedanceSet tie;
  tie.source_indices = {1, 2};
  tie.deficits = {1.0, 1.0};
  CHECK(decluster_runs(tie, 3).source_indices == std::vector<std::size_t>{1});
}

TEST_CASE("tail_probability") {
  TailModel m;
  m.threshold = -60.0;
  m.params = {0.0, 2.0};
  m.stats = {100, 5};
  CHECK(tail_probability(m, -64.0) == Approx(0.05 * std::exp(-2.0)).epsilon(1e-12));
  CHECK(tail_probability(m, std::nextafter(-60.0, -100.0)) == Approx(0.05).epsilon(1e-9));
  m.stats.n_u = 0;
  CHECK(tail_probability(m, -64.0) == 0.0);
  CHECK_THROWS_AS(tail_probability(m, -60.0), DomainError);
}

TEST_CASE("stats quantile uses linear interpolation of order statistics") {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  CHECK(stats::quantile(v, 0.05) == Approx(5.95));
  CHECK(stats::median(v) == Approx(50.5));
  CHECK(stats::quantile(v, 0.0) == 1.0);
  CHECK(stats::quantile(v, 1.0) == 100.0);
  CHECK(stats::sample_variance(std::vector<double>{1.0}) == 0.0);
  CHECK_THROWS_AS(stats::quantile(std::vector<double>{}, 0.5), DomainError);
}

TEST_CASE("sample series rejects non-finite values") {
  CHECK_THROWS(SampleSeries({1.0, std::numeric_limits<double>::quiet_NaN()}, 0.002));
  CHECK_THROWS(SampleSeries({1.0, std::numeric_limits<double>::infinity()}, 0.002));
  const SampleSeries s({1.0, 2.0, 3.0}, 0.5, "x");
  CHECK(s.slice(1, 3).size() == 2);
  CHECK(s.slice(1, 3)[0] == 2.0);
}
