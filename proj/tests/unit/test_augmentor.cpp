#include <algorithm>
#include <cmath>
#include <vector>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "tailgan/augmentor.hpp"
#include "tailgan/errors.hpp"
#include "tailgan/exceedance.hpp"
#include "tailgan/gpd.hpp"
#include "tailgan/stats.hpp"
#include "tailgan/synth.hpp"

using namespace tailgan;
using doctest::Approx;

namespace {

HybridGenerator fixed_generator(double p_u, GpdParams tail) {
  Rng rng(1);
  HybridGenerator g;
  const std::vector<std::size_t> widths = {16, 64, 64, 1};
  g.bulk_net = nn::DenseNet::create(widths, nn::Activation::relu(), nn::Activation::identity(), rng);
  g.threshold = -62.5;
  g.tail = tail;
  g.tail_probability = p_u;
  g.center = -60.0;
  g.scale = 2.5;
  return g;
}

AugmentConfig quick_config() {
  AugmentConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 256;
  cfg.min_regime_samples = 1000;
  return cfg;
}

std::vector<double> oracle_stream(std::uint64_t seed, std::size_t n, double shape = 0.2) {
  SynthConfig sc;
  sc.regimes = {RegimeSpec{-60.0, 2.5, -62.5, {shape, 1.0}, 0.1, n}};
  sc.total_samples = n;
  sc.seed = seed;
  const auto s = generate_synthetic(sc).series.values();
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("hybrid_generate degenerate mixtures") {
  Rng rng(2);
  const GeneratedSamples bulk = hybrid_generate(fixed_generator(0.0, {0.2, 1.0}), 20'000, rng);
  for (const double y : bulk.values) REQUIRE(y >= -62.5);
  CHECK(std::none_of(bulk.tail_branch.begin(), bulk.tail_branch.end(), [](bool b) { return b; }));

  const GeneratedSamples tail = hybrid_generate(fixed_generator(1.0, {0.2, 1.0}), 100'000, rng);
  std::vector<double> z;
  for (const double y : tail.values) z.push_back(-62.5 - y);
  const double ks = oracle::ks_one_sample(z, [](double x) { return static_cast<double>(oracle::gpd_cdf(x, 0.2, 1.0)); });
  CHECK(ks <= 0.01);

  const GeneratedSamples mixed = hybrid_generate(fixed_generator(0.05, {0.2, 1.0}), 100'000, rng);
  const auto below = std::count_if(mixed.values.begin(), mixed.values.end(), [](double y) { return y < -62.5; });
  CHECK(static_cast<double>(below) / 1e5 == Approx(0.05).epsilon(0.1));
  for (std::size_t i = 0; i < mixed.values.size(); ++i) REQUIRE(mixed.tail_branch[i] == (mixed.values[i] < -62.5));

  CHECK(hybrid_generate(fixed_generator(0.3, {0.2, 1.0}), 0, rng).values.empty());
}

TEST_CASE("hybrid tail fit is the MLE of the deficits below the empirical quantile") {
  // Pure GPD lower tail: y = -z. Deficits beyond the 95% point q of z are
  // GPD(xi, beta + xi q) by threshold stability.
  Rng rng(3);
  const GpdParams truth{0.2, 1.0};
  std::vector<double> real = gpd_sample(2'000'000, truth, rng);
  for (auto& y : real) y = -y;
  AugmentConfig cfg;
  cfg.run_gap = 0;
  const HybridGenerator g = fit_hybrid_tail(real, cfg, 4);
  CHECK(g.threshold == stats::quantile(real, 0.05));
  const ExceedanceSet e = extract_exceedances(real, g.threshold);
  const MleFit direct = fit_gpd_mle(e.deficits);
  CHECK(g.tail.shape == direct.params.shape);
  CHECK(g.tail.scale == direct.params.scale);
  CHECK(g.tail_probability == Approx(static_cast<double>(e.size()) / static_cast<double>(real.size())).epsilon(1e-12));

  const double q = -g.threshold;
  CHECK(g.tail.shape >= 0.18);
  CHECK(g.tail.shape <= 0.22);
  CHECK(g.tail.scale == Approx(truth.scale + truth.shape * q).epsilon(0.03));
}

TEST_CASE("train_augmentor is deterministic and skips thin regimes") {
  const auto real = oracle_stream(7, 3000);
  std::vector<std::size_t> labels(real.size(), 0);
  std::fill(labels.begin() + 2500, labels.end(), 1);
  const AugmentConfig cfg = quick_config();
  const AugmentorResult a = train_augmentor(real, labels, cfg, 11);
  const AugmentorResult b = train_augmentor(real, labels, cfg, 11);
  REQUIRE(a.generators.size() == 1);
  CHECK(a.generators[0].regime == 0);
  CHECK(a.skipped == std::vector<std::size_t>{1});
  CHECK(!a.warnings.empty());
  REQUIRE(a.generators[0].history.size() == cfg.epochs);
  for (std::size_t i = 0; i < cfg.epochs; ++i) {
    CHECK(a.generators[0].history[i].loss_d == b.generators[0].history[i].loss_d);
    CHECK(a.generators[0].history[i].loss_g == b.generators[0].history[i].loss_g);
  }
  CHECK(to_json(a).dump() == to_json(b).dump());

  AugmentConfig global = cfg;
  global.per_regime = false;
  CHECK(train_augmentor(real, labels, global, 11).generators.size() == 1);
}

TEST_CASE("vanilla GAN determinism and empty generation") {
  const auto real = oracle_stream(8, 2000);
  const AugmentConfig cfg = quick_config();
  const VanillaResult a = train_vanilla_gan(real, cfg, 5);
  const VanillaResult b = train_vanilla_gan(real, cfg, 5);
  CHECK(a.generator.net.parameters() == b.generator.net.parameters());
  Rng r1(9), r2(9);
  CHECK(vanilla_generate(a.generator, 500, r1) == vanilla_generate(b.generator, 500, r2));
  CHECK(vanilla_generate(a.generator, 0, r1).empty());
}

TEST_CASE("build_augmented_dataset") {
  const auto real = oracle_stream(9, 3000);
  const std::vector<std::size_t> labels(real.size(), 0);
  const AugmentorResult gens = train_augmentor(real, labels, quick_config(), 3);
  Rng rng(4);
  const AugmentedDataset none = build_augmented_dataset(real, labels, gens, 0.0, rng);
  CHECK(none.values == real);
  const AugmentedDataset doubled = build_augmented_dataset(real, labels, gens, 1.0, rng);
  CHECK(doubled.values.size() == 2 * real.size());
  CHECK(doubled.origins.size() == doubled.values.size());
  CHECK(doubled.regimes.size() == doubled.values.size());
  const AugmentedDataset odd = build_augmented_dataset(real, labels, gens, 0.3333, rng);
  CHECK(odd.values.size() == real.size() + static_cast<std::size_t>(std::ceil(0.3333 * 3000.0)));

  std::vector<double> recovered;
  for (std::size_t i = 0; i < doubled.values.size(); ++i) {
    if (doubled.origins[i] == Origin::real) recovered.push_back(doubled.values[i]);
  }
  CHECK(recovered == real);

  // The hybrid branch puts p_u of the synthetic mass below u, p_u being the
  // real fraction below u, so the augmented fraction cannot fall short by
  // more than sampling noise.
  const double u = gens.generators[0].generator.threshold;
  const auto frac = [u](const std::vector<double>& v) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [u](double y) { return y < u; })) / static_cast<double>(v.size());
  };
  const AugmentedDataset big = build_augmented_dataset(real, labels, gens, 20.0, rng);
  CHECK(frac(big.values) >= frac(real) - 0.005);
}

TEST_CASE("generator JSON round-trips") {
  const HybridGenerator g = fixed_generator(0.07, {0.15, 1.3});
  const HybridGenerator h = hybrid_from_json(nlohmann::json::parse(to_json(g).dump()));
  CHECK(h.bulk_net.parameters() == g.bulk_net.parameters());
  CHECK(h.threshold == g.threshold);
  CHECK(h.tail.shape == g.tail.shape);
  CHECK(h.tail.scale == g.tail.scale);
  CHECK(h.tail_probability == g.tail_probability);
  CHECK(to_json(h).dump() == to_json(g).dump());

  VanillaGenerator v;
  v.net = g.bulk_net;
  v.center = -61.0;
  v.scale = 3.0;
  CHECK(to_json(vanilla_from_json(to_json(v))).dump() == to_json(v).dump());

  nlohmann::json bad = to_json(g);
  bad["tail_probability"] = 1.5;
  CHECK_THROWS_AS(hybrid_from_json(bad), ConfigError);
  AugmentConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("vanilla GAN covers less of the extreme tail than the hybrid generator") {
  // 0.1% quantile of each generator on heavy-tailed oracle data.
  AugmentConfig cfg;
  cfg.per_regime = false;
  cfg.run_gap = 0;
  int shallower = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto real = oracle_stream(derive_seed(seed, "extreme-stream"), 10000, 0.3);
    const AugmentorResult hybrid = train_augmentor(real, {}, cfg, derive_seed(seed, "hybrid"));
    const VanillaResult vanilla = train_vanilla_gan(real, cfg, derive_seed(seed, "vanilla"));
    Rng rng(derive_seed(seed, "extreme-sample"));
    const double qh = stats::quantile(hybrid_generate(hybrid.generators.at(0).generator, 200'000, rng).values, 0.001);
    const double qv = stats::quantile(vanilla_generate(vanilla.generator, 200'000, rng), 0.001);
    INFO("seed " << seed << ": hybrid " << qh << " vanilla " << qv);
    shallower += qv > qh;
  }
  CHECK(shallower >= 18);
}
