#include "tailgan/augmentor.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tailgan/errors.hpp"
#include "tailgan/exceedance.hpp"
#include "tailgan/nn/adam.hpp"
#include "tailgan/nn/losses.hpp"
#include "tailgan/nn/serialization.hpp"
#include "tailgan/stats.hpp"

namespace tailgan {
namespace {

double softplus(double x) { return nn::activate(nn::Activation::softplus(), x); }
double sigmoid(double x) { return nn::activate(nn::Activation::sigmoid(), x); }

nn::DenseNet make_generator(std::size_t latent, Rng& rng) {
  const std::vector<std::size_t> widths{latent, 64, 64, 1};
  return nn::DenseNet::create(widths, nn::Activation::relu(), nn::Activation::identity(), rng);
}

nn::DenseNet make_discriminator(Rng& rng) {
  const std::vector<std::size_t> widths{1, 64, 64, 1};
  return nn::DenseNet::create(widths, nn::Activation::leaky_relu(0.01), nn::Activation::identity(), rng);
}

nn::Matrix latent_batch(std::size_t n, std::size_t dim, Rng& rng) {
  nn::Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

void standardization(std::span<const double> real, double& center, double& scale) {
  center = stats::median(real);
  const double sd = std::sqrt(stats::sample_variance(real));
  scale = sd > 0.0 ? sd : 1.0;
}

// One pass of shuffled real batches. `make_fake` fills the standardized fake
// column and returns what the generator update needs.
struct FakeBatch {
  nn::Matrix x;                // standardized fake samples, n x 1
  nn::Matrix latent;           // latent rows of the samples driven by g
  std::vector<std::size_t> g_rows;  // row of x for each latent row
  nn::Matrix g_raw;            // g output of those rows
};

struct GanParts {
  nn::DenseNet* generator;
  nn::DenseNet discriminator;
  nn::AdamState g_state;
  nn::AdamState d_state;
};

template <typename MakeFake, typename OutputGrad>
std::vector<GanEpoch> run_gan(GanParts& parts, std::span<const double> real, double center, double scale,
                              const AugmentConfig& cfg, Rng& rng, MakeFake make_fake, OutputGrad output_grad) {
  std::vector<double> xs(real.size());
  for (std::size_t i = 0; i < real.size(); ++i) xs[i] = (real[i] - center) / scale;
  std::vector<std::size_t> order(real.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<GanEpoch> history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double sum_d = 0.0;
    double sum_g = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      nn::Matrix x(static_cast<Eigen::Index>(2 * n), 1);
      for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), 0) = xs[order[start + i]];
      FakeBatch fake = make_fake(n);
      x.bottomRows(static_cast<Eigen::Index>(n)) = fake.x;

      // Discriminator: BCE(real, 1) + BCE(fake, 0).
      const nn::ForwardPass dp = parts.discriminator.forward(x);
      std::vector<double> lr(dp.output.data(), dp.output.data() + n);
      std::vector<double> lf(dp.output.data() + n, dp.output.data() + 2 * n);
      const nn::LossValue a = nn::bce_with_logits(lr, 1.0);
      const nn::LossValue b = nn::bce_with_logits(lf, 0.0);
      nn::Matrix dgrad(static_cast<Eigen::Index>(2 * n), 1);
      for (std::size_t i = 0; i < n; ++i) {
        dgrad(static_cast<Eigen::Index>(i), 0) = a.grad[i];
        dgrad(static_cast<Eigen::Index>(n + i), 0) = b.grad[i];
      }
      nn::apply_update(parts.discriminator, parts.d_state, parts.discriminator.backward(dp.tape, dgrad).flatten(),
                       cfg.max_grad_norm);

      // Generator: BCE(D(fake), 1) through the g-driven rows only.
      const nn::ForwardPass fp = parts.discriminator.forward(fake.x);
      const std::vector<double> logits(fp.output.data(), fp.output.data() + n);
      const nn::LossValue g = nn::bce_with_logits(logits, 1.0);
      double loss_g = g.value;
      if (!fake.g_rows.empty()) {
        nn::Matrix dl(static_cast<Eigen::Index>(n), 1);
        for (std::size_t i = 0; i < n; ++i) dl(static_cast<Eigen::Index>(i), 0) = g.grad[i];
        const nn::Matrix dx = parts.discriminator.backward(fp.tape, dl).input;
        const nn::ForwardPass gp = parts.generator->forward(fake.latent);
        nn::Matrix gout(static_cast<Eigen::Index>(fake.g_rows.size()), 1);
        for (std::size_t k = 0; k < fake.g_rows.size(); ++k) {
          const auto r = static_cast<Eigen::Index>(k);
          gout(r, 0) = dx(static_cast<Eigen::Index>(fake.g_rows[k]), 0) * output_grad(gp.output(r, 0));
        }
        nn::apply_update(*parts.generator, parts.g_state, parts.generator->backward(gp.tape, gout).flatten(),
                         cfg.max_grad_norm);
      }
      const double loss_d = a.value + b.value;
      if (!std::isfinite(loss_d) || !std::isfinite(loss_g)) {
        throw NumericalError("augmentor GAN loss became non-finite at epoch " + std::to_string(epoch));
      }
      sum_d += loss_d;
      sum_g += loss_g;
      ++steps;
    }
    history.push_back({epoch, sum_d / static_cast<double>(steps), sum_g / static_cast<double>(steps)});
  }
  return history;
}

}  // namespace

void validate(const AugmentConfig& cfg) {
  if (cfg.batch_size == 0 || cfg.latent_dim == 0) throw ConfigError("batch_size and latent_dim must be positive");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("Adam momenta must lie in [0, 1)");
  }
  if (!(cfg.tail_level > 0.0 && cfg.tail_level < 0.5)) throw ConfigError("tail_level must lie in (0, 0.5)");
  if (!(cfg.ratio >= 0.0) || !std::isfinite(cfg.ratio)) throw ConfigError("ratio must be >= 0");
  if (!(cfg.max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be positive");
}

nlohmann::json to_json(const AugmentConfig& cfg) {
  return {{"batch_size", cfg.batch_size},   {"epochs", cfg.epochs},
          {"learning_rate", cfg.learning_rate}, {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},             {"latent_dim", cfg.latent_dim},
          {"per_regime", cfg.per_regime},   {"tail_level", cfg.tail_level},
          {"run_gap", cfg.run_gap},         {"ratio", cfg.ratio},
          {"min_regime_samples", cfg.min_regime_samples}, {"max_grad_norm", cfg.max_grad_norm}};
}

AugmentConfig augment_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("augment config must be a JSON object");
  AugmentConfig cfg;
  try {
    for (const auto& item : doc.items()) {
      const std::string& k = item.key();
      const auto& v = item.value();
      if (k == "batch_size") cfg.batch_size = v.get<std::size_t>();
      else if (k == "epochs") cfg.epochs = v.get<std::size_t>();
      else if (k == "learning_rate") cfg.learning_rate = v.get<double>();
      else if (k == "beta1") cfg.beta1 = v.get<double>();
      else if (k == "beta2") cfg.beta2 = v.get<double>();
      else if (k == "latent_dim") cfg.latent_dim = v.get<std::size_t>();
      else if (k == "per_regime") cfg.per_regime = v.get<bool>();
      else if (k == "tail_level") cfg.tail_level = v.get<double>();
      else if (k == "run_gap") cfg.run_gap = v.get<std::size_t>();
      else if (k == "ratio") cfg.ratio = v.get<double>();
      else if (k == "min_regime_samples") cfg.min_regime_samples = v.get<std::size_t>();
      else if (k == "max_grad_norm") cfg.max_grad_norm = v.get<double>();
      else throw ConfigError("augment config: unknown key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("augment config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

GeneratedSamples hybrid_generate(const HybridGenerator& gen, std::size_t n, Rng& rng) {
  GeneratedSamples out;
  out.values.resize(n);
  out.tail_branch.resize(n);
  std::vector<std::size_t> bulk;
  for (std::size_t i = 0; i < n; ++i) {
    const bool tail = rng.uniform() < gen.tail_probability;
    out.tail_branch[i] = tail;
    if (tail) {
      out.values[i] = gen.threshold - gpd_quantile(rng.uniform(), gen.tail);
    } else {
      bulk.push_back(i);
    }
  }
  if (!bulk.empty()) {
    const nn::Matrix g = gen.bulk_net.predict(latent_batch(bulk.size(), gen.bulk_net.input_dim(), rng));
    for (std::size_t k = 0; k < bulk.size(); ++k) {
      out.values[bulk[k]] = gen.threshold + gen.scale * softplus(g(static_cast<Eigen::Index>(k), 0));
    }
  }
  return out;
}

std::vector<double> vanilla_generate(const VanillaGenerator& gen, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  if (n == 0) return out;
  const nn::Matrix g = gen.net.predict(latent_batch(n, gen.net.input_dim(), rng));
  for (std::size_t i = 0; i < n; ++i) out[i] = gen.center + gen.scale * g(static_cast<Eigen::Index>(i), 0);
  return out;
}

HybridGenerator fit_hybrid_tail(std::span<const double> real, const AugmentConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (real.size() < 20) throw FitError("hybrid tail fit needs data", real.size());
  HybridGenerator gen;
  gen.threshold = stats::quantile(real, cfg.tail_level);
  const ExceedanceSet ex = decluster_runs(extract_exceedances(real, gen.threshold), cfg.run_gap);
  gen.tail = fit_gpd_mle(ex.deficits).params;
  const auto below = std::count_if(real.begin(), real.end(), [&gen](double y) { return y < gen.threshold; });
  gen.tail_probability = static_cast<double>(below) / static_cast<double>(real.size());
  standardization(real, gen.center, gen.scale);
  Rng rng(derive_seed(seed, "bulk_init"));
  gen.bulk_net = make_generator(cfg.latent_dim, rng);
  return gen;
}

std::vector<GanEpoch> train_bulk(HybridGenerator& gen, std::span<const double> real, const AugmentConfig& cfg,
                                 std::uint64_t seed) {
  validate(cfg);
  Rng init(derive_seed(seed, "bulk_discriminator"));
  GanParts parts{&gen.bulk_net, make_discriminator(init),
                 nn::AdamState::zeros(gen.bulk_net.parameter_count(), {cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8}),
                 {}};
  parts.d_state = nn::AdamState::zeros(parts.discriminator.parameter_count(),
                                       {cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8});
  Rng rng(derive_seed(seed, "bulk_training"));
  const double u_std = (gen.threshold - gen.center) / gen.scale;
  auto make_fake = [&](std::size_t n) {
    FakeBatch f;
    f.x.resize(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() < gen.tail_probability) {
        const double y = gen.threshold - gpd_quantile(rng.uniform(), gen.tail);
        f.x(static_cast<Eigen::Index>(i), 0) = (y - gen.center) / gen.scale;
      } else {
        f.g_rows.push_back(i);
      }
    }
    f.latent = latent_batch(f.g_rows.size(), cfg.latent_dim, rng);
    if (!f.g_rows.empty()) {
      f.g_raw = gen.bulk_net.predict(f.latent);
      for (std::size_t k = 0; k < f.g_rows.size(); ++k) {
        f.x(static_cast<Eigen::Index>(f.g_rows[k]), 0) = u_std + softplus(f.g_raw(static_cast<Eigen::Index>(k), 0));
      }
    }
    return f;
  };
  return run_gan(parts, real, gen.center, gen.scale, cfg, rng, make_fake, [](double g) { return sigmoid(g); });
}

AugmentorResult train_augmentor(std::span<const double> real, std::span<const std::size_t> regime_labels,
                                const AugmentConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (!regime_labels.empty() && regime_labels.size() != real.size()) {
    throw DimensionError("regime labels do not match the series length");
  }
  std::map<std::size_t, std::vector<double>> groups;
  const bool split = cfg.per_regime && !regime_labels.empty();
  for (std::size_t i = 0; i < real.size(); ++i) groups[split ? regime_labels[i] : 0].push_back(real[i]);

  AugmentorResult result;
  for (const auto& [label, values] : groups) {
    if (values.size() < cfg.min_regime_samples) {
      result.skipped.push_back(label);
      result.warnings.push_back("regime " + std::to_string(label) + " skipped: " + std::to_string(values.size()) +
                                " samples < " + std::to_string(cfg.min_regime_samples));
      continue;
    }
    const std::uint64_t s = derive_seed(seed, label);
    RegimeGenerator rg;
    rg.regime = label;
    rg.real_count = values.size();
    try {
      rg.generator = fit_hybrid_tail(values, cfg, s);
    } catch (const FitError& e) {
      result.skipped.push_back(label);
      result.warnings.push_back("regime " + std::to_string(label) + " skipped: " + e.what());
      continue;
    }
    rg.history = train_bulk(rg.generator, values, cfg, s);
    result.generators.push_back(std::move(rg));
  }
  return result;
}

VanillaResult train_vanilla_gan(std::span<const double> real, const AugmentConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (real.size() < cfg.min_regime_samples) throw FitError("vanilla GAN needs more samples", real.size());
  VanillaResult out;
  standardization(real, out.generator.center, out.generator.scale);
  Rng init(derive_seed(seed, "vanilla_init"));
  out.generator.net = make_generator(cfg.latent_dim, init);
  Rng dinit(derive_seed(seed, "vanilla_discriminator"));
  GanParts parts{&out.generator.net, make_discriminator(dinit),
                 nn::AdamState::zeros(out.generator.net.parameter_count(),
                                      {cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8}),
                 {}};
  parts.d_state = nn::AdamState::zeros(parts.discriminator.parameter_count(),
                                       {cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8});
  Rng rng(derive_seed(seed, "vanilla_training"));
  auto make_fake = [&](std::size_t n) {
    FakeBatch f;
    f.latent = latent_batch(n, cfg.latent_dim, rng);
    f.g_raw = out.generator.net.predict(f.latent);
    f.x = f.g_raw;
    f.g_rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.g_rows[i] = i;
    return f;
  };
  out.history = run_gan(parts, real, out.generator.center, out.generator.scale, cfg, rng, make_fake,
                        [](double) { return 1.0; });
  return out;
}

AugmentedDataset build_augmented_dataset(std::span<const double> real, std::span<const std::size_t> regime_labels,
                                         const AugmentorResult& generators, double ratio, Rng& rng) {
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) throw DomainError("ratio must be >= 0");
  if (!regime_labels.empty() && regime_labels.size() != real.size()) {
    throw DimensionError("regime labels do not match the series length");
  }
  AugmentedDataset out;
  out.values.assign(real.begin(), real.end());
  out.origins.assign(real.size(), Origin::real);
  if (regime_labels.empty()) {
    out.regimes.assign(real.size(), 0);
  } else {
    out.regimes.assign(regime_labels.begin(), regime_labels.end());
  }
  const auto total = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(real.size())));
  if (total == 0) return out;
  if (generators.generators.empty()) throw FitError("no trained generator to augment with", real.size());

  // Largest-remainder split of `total` by real count.
  double weight_sum = 0.0;
  for (const auto& g : generators.generators) weight_sum += static_cast<double>(g.real_count);
  std::vector<std::size_t> counts;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < generators.generators.size(); ++k) {
    const double share = static_cast<double>(total) * static_cast<double>(generators.generators[k].real_count) / weight_sum;
    counts.push_back(static_cast<std::size_t>(std::floor(share)));
    assigned += counts.back();
    remainders.push_back({share - std::floor(share), k});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];

  for (std::size_t k = 0; k < generators.generators.size(); ++k) {
    const auto& g = generators.generators[k];
    const GeneratedSamples s = hybrid_generate(g.generator, counts[k], rng);
    out.values.insert(out.values.end(), s.values.begin(), s.values.end());
    out.origins.insert(out.origins.end(), counts[k], Origin::synthetic);
    out.regimes.insert(out.regimes.end(), counts[k], g.regime);
  }
  return out;
}

nlohmann::json to_json(const HybridGenerator& gen) {
  return {{"bulk_net", nn::to_json(gen.bulk_net)},
          {"threshold", gen.threshold},
          {"tail_shape", gen.tail.shape},
          {"tail_scale", gen.tail.scale},
          {"tail_probability", gen.tail_probability},
          {"center", gen.center},
          {"scale", gen.scale}};
}

HybridGenerator hybrid_from_json(const nlohmann::json& doc) {
  try {
    HybridGenerator g;
    g.bulk_net = nn::dense_net_from_json(doc.at("bulk_net"));
    g.threshold = doc.at("threshold").get<double>();
    g.tail = {doc.at("tail_shape").get<double>(), doc.at("tail_scale").get<double>()};
    g.tail_probability = doc.at("tail_probability").get<double>();
    g.center = doc.at("center").get<double>();
    g.scale = doc.at("scale").get<double>();
    validate(g.tail);
    if (!(g.tail_probability >= 0.0 && g.tail_probability <= 1.0)) {
      throw ConfigError("hybrid generator: tail_probability must lie in [0, 1]");
    }
    if (!std::isfinite(g.threshold) || !std::isfinite(g.center) || !(g.scale > 0.0) || !std::isfinite(g.scale)) {
      throw ConfigError("hybrid generator: threshold, center and scale must be finite with scale > 0");
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed hybrid generator: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("hybrid generator: ") + e.what());
  }
}

nlohmann::json to_json(const VanillaGenerator& gen) {
  return {{"net", nn::to_json(gen.net)}, {"center", gen.center}, {"scale", gen.scale}};
}

VanillaGenerator vanilla_from_json(const nlohmann::json& doc) {
  try {
    return {nn::dense_net_from_json(doc.at("net")), doc.at("center").get<double>(), doc.at("scale").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed vanilla generator: ") + e.what());
  }
}

nlohmann::json to_json(const AugmentorResult& result) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : result.generators) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& e : g.history) hist.push_back({e.epoch, e.loss_d, e.loss_g});
    gens.push_back({{"regime", g.regime},
                    {"real_count", g.real_count},
                    {"generator", to_json(g.generator)},
                    {"history", hist}});
  }
  return {{"format", "tailgan.augmentor"},
          {"version", 1},
          {"generators", gens},
          {"skipped", result.skipped},
          {"warnings", result.warnings}};
}

AugmentorResult augmentor_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "tailgan.augmentor") throw ConfigError("not an augmentor file");
    AugmentorResult r;
    for (const auto& g : doc.at("generators")) {
      RegimeGenerator rg;
      rg.regime = g.at("regime").get<std::size_t>();
      rg.real_count = g.at("real_count").get<std::size_t>();
      rg.generator = hybrid_from_json(g.at("generator"));
      for (const auto& e : g.at("history")) {
        rg.history.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>(), e.at(2).get<double>()});
      }
      r.generators.push_back(std::move(rg));
    }
    r.skipped = doc.at("skipped").get<std::vector<std::size_t>>();
    r.warnings = doc.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed augmentor file: ") + e.what());
  }
}

}  // namespace tailgan
