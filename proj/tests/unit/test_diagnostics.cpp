#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "tailgan/diagnostics.hpp"
#include "tailgan/errors.hpp"
#include "tailgan/gpd.hpp"

using namespace tailgan;
using doctest::Approx;

namespace {

double cdf_of(const GpdParams& p, double z) { return static_cast<double>(oracle::gpd_cdf(z, p.shape, p.scale)); }

}  // namespace

TEST_CASE("qq_points layout") {
  const GpdParams model{0.1, 2.0};
  const std::vector<double> z = {3.0, 0.5, 1.5, 0.1};
  const QqPoints qq = qq_points(z, model);
  CHECK(qq.empirical == std::vector<double>{0.1, 0.5, 1.5, 3.0});
  for (std::size_t i = 0; i < 4; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / 4.0;
    CHECK(qq.model[i] == Approx(static_cast<double>(oracle::gpd_quantile(p, 0.1, 2.0))).epsilon(1e-13));
  }
  CHECK_THROWS_AS(qq_points(std::vector<double>{1.0}, model), FitError);

  Rng rng(1);
  const auto draws = gpd_sample(10'000, model, rng);
  const QqPoints big = qq_points(draws, model);
  CHECK(ppcc(big) >= 0.999);
  CHECK(std::is_sorted(big.empirical.begin(), big.empirical.end()));
  CHECK(std::is_sorted(big.model.begin(), big.model.end()));
}

TEST_CASE("ks_statistic examples") {
  const GpdParams model{0.2, 1.0};
  // One point at the model median: max(1 - 0.5, 0.5 - 0) = 0.5.
  const double median = gpd_quantile(0.5, model);
  CHECK(ks_statistic(std::vector<double>{median}, model) == Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(ks_statistic(std::vector<double>{}, model), FitError);

  std::vector<double> ks_values;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(derive_seed(seed, "ks"));
    const auto z = gpd_sample(100'000, model, rng);
    ks_values.push_back(ks_statistic(z, model));
    if (seed <= 3) {
      CHECK(ks_values.back() == Approx(oracle::ks_one_sample(z, [&](double x) { return cdf_of(model, x); })).epsilon(1e-12));
    }
  }
  CHECK(oracle::quantile_linear(ks_values, 0.95) <= 0.006);

  Rng rng(4);
  const auto z = gpd_sample(10'000, model, rng);
  CHECK(ks_statistic(z, GpdParams{0.2, 10.0}) >= 0.5);
}

TEST_CASE("KS is invariant under the probability integral transform") {
  Rng rng(5);
  const GpdParams model{-0.2, 1.3};
  const auto z = gpd_sample(2000, model, rng);
  std::vector<double> u;
  for (const double x : z) u.push_back(gpd_cdf(x, model));
  const double direct = ks_statistic(z, model);
  const double pit = ks_statistic(u, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(direct == Approx(pit).epsilon(1e-12));
}

TEST_CASE("quantile errors and PPCC examples") {
  QqPoints same;
  same.empirical = {0.1, 0.4, 0.9, 2.0};
  same.model = same.empirical;
  const QuantileErrors zero = quantile_errors(same);
  CHECK(zero.mse == 0.0);
  CHECK(zero.rmse == 0.0);
  CHECK(zero.mae == 0.0);
  CHECK(ppcc(same) == Approx(1.0));

  QqPoints shifted = same;
  for (auto& x : shifted.model) x -= 0.3;
  const QuantileErrors off = quantile_errors(shifted);
  CHECK(off.mae == Approx(0.3));
  CHECK(off.rmse == Approx(0.3));

  QqPoints linear;
  linear.empirical = {1, 2, 3, 4, 5};
  linear.model = {0.5, 2.5, 4.5, 6.5, 8.5};
  CHECK(ppcc(linear) == Approx(1.0).epsilon(1e-14));
  QqPoints anti;
  anti.empirical = {1, 2, 3, 4, 5};
  anti.model = {5, 4, 3, 2, 1};
  CHECK(ppcc(anti) == Approx(-1.0).epsilon(1e-14));

  QqPoints flat;
  flat.empirical = {1, 1, 1};
  flat.model = {1, 2, 3};
  CHECK_THROWS_AS(ppcc(flat), FitError);
  QqPoints two;
  two.empirical = {1, 2};
  two.model = {1, 2};
  CHECK_THROWS_AS(ppcc(two), FitError);
}

TEST_CASE("oracle-parameter model at about 72 exceedances") {
  // The KS of 72 draws against their own generating law follows the
  // Kolmogorov null: median about 0.83 / sqrt(72) = 0.098, 99th percentile
  // about 1.63 / sqrt(72) = 0.19. The bound below is that 99th percentile.
  const GpdParams model{0.2, 1.0};
  const double bound = 1.628 / std::sqrt(72.0);
  std::vector<double> ks;
  std::vector<double> pp;
  for (std::uint64_t seed = 1; seed <= 400; ++seed) {
    Rng rng(derive_seed(seed, "n72"));
    const auto z = gpd_sample(72, model, rng);
    const DiagnosticsReport r = score(z, TailDistribution::gpd(model), "oracle", "all");
    ks.push_back(r.ks);
    pp.push_back(r.ppcc);
  }
  const double exceed = static_cast<double>(std::count_if(ks.begin(), ks.end(), [&](double k) { return k > bound; }));
  CHECK(exceed / 400.0 <= 0.03);
  CHECK(oracle::quantile_linear(ks, 0.5) == Approx(0.8276 / std::sqrt(72.0)).epsilon(0.1));
  // PPCC of a correct model is high but well short of 1 at this size.
  CHECK(oracle::quantile_linear(pp, 0.5) >= 0.95);
}

TEST_CASE("score and aggregate") {
  Rng rng(6);
  const GpdParams model{0.1, 1.0};
  const auto a = gpd_sample(50, model, rng);
  const auto b = gpd_sample(150, model, rng);
  const DiagnosticsReport ra = score(a, TailDistribution::gpd(model), "m", "regime:0");
  const DiagnosticsReport rb = score(b, TailDistribution::gpd(model), "m", "regime:1");
  CHECK(ra.n == 50);
  CHECK(ra.rmse == std::sqrt(ra.mse));
  const std::vector<DiagnosticsReport> groups = {ra, rb};
  const DiagnosticsReport all = aggregate(groups, "m");
  CHECK(all.n == 200);
  CHECK(all.scope == "all");
  CHECK(all.ks == Approx((50 * ra.ks + 150 * rb.ks) / 200));
  CHECK(all.mae == Approx((50 * ra.mae + 150 * rb.mae) / 200));
  CHECK(all.rmse == std::sqrt(all.mse));

  const DiagnosticsReport tiny = score(std::vector<double>{0.4, 0.9}, TailDistribution::gpd(model), "m", "window:3");
  CHECK(std::isnan(tiny.ppcc));
  CHECK(std::isfinite(tiny.ks));

  const DiagnosticsReport back = report_from_json(nlohmann::json::parse(to_json(ra).dump()));
  CHECK(back == ra);
  const DiagnosticsReport tiny_back = report_from_json(nlohmann::json::parse(to_json(tiny).dump()));
  CHECK(std::isnan(tiny_back.ppcc));
  CHECK(tiny_back.ks == tiny.ks);

  ModelEvaluation ev{all, groups, {}};
  CHECK(to_json(evaluation_from_json(nlohmann::json::parse(to_json(ev).dump()))).dump() == to_json(ev).dump());

  const std::string row = to_csv_row(ra);
  CHECK(std::count(row.begin(), row.end(), ',') == 7);
  CHECK(row.rfind("m,regime:0,50,", 0) == 0);
  CHECK(std::string(kReportCsvHeader) == "model,scope,n,ks,mse,rmse,mae,ppcc");
}

TEST_CASE("mixture and empirical tail distributions") {
  const std::vector<GpdParams> comps = {{0.1, 1.0}, {-0.2, 3.0}};
  const TailDistribution mix = TailDistribution::mixture(comps, {1.0, 3.0});
  for (const double z : {0.0, 0.5, 2.0, 9.0}) {
    const double expected = 0.25 * cdf_of(comps[0], z) + 0.75 * cdf_of(comps[1], z);
    CHECK(mix.cdf(z) == Approx(expected).epsilon(1e-13));
  }
  for (const double p : {0.01, 0.3, 0.9, 0.999}) CHECK(mix.cdf(mix.quantile(p)) == Approx(p).epsilon(1e-9));
  CHECK_THROWS_AS(TailDistribution::mixture(comps, {1.0}), DimensionError);
  CHECK_THROWS_AS(TailDistribution::mixture(comps, {0.0, 0.0}), DomainError);

  const TailDistribution emp = TailDistribution::empirical({3.0, 1.0, 2.0, 4.0});
  CHECK(emp.cdf(0.5) == 0.0);
  CHECK(emp.cdf(2.0) == 0.5);
  CHECK(emp.cdf(10.0) == 1.0);
  CHECK_THROWS_AS(TailDistribution::empirical({}), FitError);

  CHECK(ks_two_sample(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK(ks_two_sample(std::vector<double>{1, 2}, std::vector<double>{5, 6}) == 1.0);
  Rng rng(7);
  const auto x = gpd_sample(300, {0.2, 1.0}, rng);
  const auto y = gpd_sample(500, {0.1, 1.2}, rng);
  CHECK(ks_two_sample(x, y) == Approx(oracle::ks_two_sample(x, y)).epsilon(1e-14));
}

TEST_CASE("qq csv has one row per pair") {
  QqPoints qq;
  qq.empirical = {0.5, 1.25};
  qq.model = {0.25, 2.0};
  const std::string csv = qq_to_csv(qq);
  CHECK(csv.find("0.5,0.25") != std::string::npos);
  CHECK(csv.find("1.25,2") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
