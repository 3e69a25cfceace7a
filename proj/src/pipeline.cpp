#include "tailgan/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "tailgan/batches.hpp"
#include "tailgan/errors.hpp"
#include "tailgan/exceedance.hpp"
#include "tailgan/stats.hpp"

namespace tailgan {

nlohmann::json to_json(const SplitConfig& cfg) {
  return {{"n_batches", cfg.n_batches},
          {"n_sub", cfg.n_sub},
          {"eval_every", cfg.eval_every},
          {"train_stride", cfg.train_stride}};
}

SplitConfig split_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("split config must be a JSON object");
  SplitConfig cfg;
  try {
    for (const auto& item : doc.items()) {
      const auto& k = item.key();
      if (k == "n_batches") cfg.n_batches = item.value().get<std::size_t>();
      else if (k == "n_sub") cfg.n_sub = item.value().get<std::size_t>();
      else if (k == "eval_every") cfg.eval_every = item.value().get<std::size_t>();
      else if (k == "train_stride") cfg.train_stride = item.value().get<std::size_t>();
      else throw ConfigError("split config: unknown key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("split config: ") + e.what());
  }
  if (cfg.n_batches == 0 || cfg.n_sub == 0 || cfg.train_stride == 0 || cfg.eval_every < 2) {
    throw ConfigError("split config values must be positive (eval_every >= 2)");
  }
  return cfg;
}

nlohmann::json to_json(const RegimeConfig& cfg) {
  return {{"enabled", cfg.enabled},
          {"k_min", cfg.k_min},
          {"k_max", cfg.k_max},
          {"restarts", cfg.options.restarts},
          {"max_iterations", cfg.options.max_iterations},
          {"tolerance", cfg.options.tolerance},
          {"variance_floor", cfg.options.variance_floor}};
}

RegimeConfig regime_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("regime config must be a JSON object");
  RegimeConfig cfg;
  try {
    for (const auto& item : doc.items()) {
      const auto& k = item.key();
      const auto& v = item.value();
      if (k == "enabled") cfg.enabled = v.get<bool>();
      else if (k == "k_min") cfg.k_min = v.get<std::size_t>();
      else if (k == "k_max") cfg.k_max = v.get<std::size_t>();
      else if (k == "restarts") cfg.options.restarts = v.get<std::size_t>();
      else if (k == "max_iterations") cfg.options.max_iterations = v.get<std::size_t>();
      else if (k == "tolerance") cfg.options.tolerance = v.get<double>();
      else if (k == "variance_floor") cfg.options.variance_floor = v.get<double>();
      else throw ConfigError("regime config: unknown key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("regime config: ") + e.what());
  }
  if (cfg.k_min == 0 || cfg.k_max < cfg.k_min) throw ConfigError("regime config needs 1 <= k_min <= k_max");
  return cfg;
}

GmmModel fit_regime_model(std::span<const double> values, std::span<const IndexRange> ranges, std::size_t window,
                          const RegimeConfig& regimes, std::uint64_t seed) {
  const WindowDataset disjoint = make_windows(values, ranges, window, window);
  std::vector<WindowFeatures> features;
  for (const auto& w : disjoint.windows) features.push_back(featurize(w));
  std::vector<std::size_t> candidates;
  for (std::size_t k = regimes.k_min; k <= regimes.k_max; ++k) {
    if (features.size() >= 5 * k) candidates.push_back(k);
  }
  if (candidates.empty()) throw FitError("too few windows for regime clustering", features.size());
  return select_k_bic(features, candidates, derive_seed(seed, "regimes"), regimes.options).model;
}

std::vector<std::size_t> label_samples(std::span<const double> values, std::size_t window, const GmmModel& model) {
  std::vector<std::size_t> labels(values.size(), 0);
  if (values.size() < window) return labels;
  const std::size_t full = values.size() / window;
  for (std::size_t w = 0; w < full; ++w) {
    const std::size_t end = w + 1 == full ? values.size() : (w + 1) * window;
    const std::size_t label = assign_regime(model, featurize(values.subspan(w * window, window))).label;
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(w * window),
              labels.begin() + static_cast<std::ptrdiff_t>(end), label);
  }
  return labels;
}

TrainingData prepare_training_data(std::span<const double> values, const SplitConfig& split,
                                   const RegimeConfig& regimes, std::size_t window, std::uint64_t seed) {
  const BatchPartition partition = split_batches(values.size(), split.n_batches, split.n_sub, window);
  const TrainEvalSplit te = split_train_eval(partition, split.eval_every);
  TrainingData data;
  data.train = make_windows(values, te.train, window, split.train_stride);
  data.eval = make_windows(values, te.eval, window, window);
  data.train_disjoint = make_windows(values, te.train, window, window);
  if (data.train.size() == 0 || data.eval.size() == 0) {
    throw FitError("sub-batches are shorter than one window", values.size());
  }
  if (regimes.enabled) {
    data.regimes = fit_regime_model(values, te.train, window, regimes, seed);
    assign_regimes(data.train, *data.regimes);
    assign_regimes(data.eval, *data.regimes);
    assign_regimes(data.train_disjoint, *data.regimes);
  }
  return data;
}

TrainOutcome train_model(const TrainingData& data, const EstimatorConfig& cfg, const std::string& objective,
                         bool constant_threshold, std::uint64_t seed) {
  if (objective != "adversarial" && objective != "kl") {
    throw ConfigError("objective must be 'adversarial' or 'kl'");
  }
  TrainOutcome out;
  EstimatorNets nets = init_nets(cfg, fit_input_scale(data.train), derive_seed(seed, "init"));
  if (constant_threshold) {
    use_constant_threshold(nets, data.train, cfg);
  } else {
    out.threshold = train_threshold_net(nets, data.train, cfg, derive_seed(seed, "threshold"));
  }
  if (objective == "adversarial") {
    out.adversarial = train_estimator(nets, data.train, cfg, derive_seed(seed, "adversarial"));
  } else {
    out.kl = train_param_net_kl(nets, data.train, cfg, derive_seed(seed, "kl"));
  }
  out.checkpoint.objective = objective;
  out.checkpoint.config = cfg;
  out.checkpoint.config.threshold_mode = nets.threshold_mode;
  out.checkpoint.nets = std::move(nets);
  out.checkpoint.regimes = data.regimes;
  return out;
}

namespace {

struct Pool {
  std::vector<double> deficits;
  std::vector<GpdParams> params;
  std::vector<double> weights;
  bool full = false;
};

}  // namespace

ModelEvaluation evaluate_estimator(const EstimatorNets& nets, const WindowDataset& eval, std::size_t run_gap,
                                   const std::string& name, std::size_t target_per_regime,
                                   std::vector<QqPoints>* qq) {
  ModelEvaluation out;
  std::map<std::size_t, Pool> pools;
  for (std::size_t t = 0; t < eval.size(); ++t) {
    Pool& pool = pools[eval.regimes[t]];
    if (pool.full) continue;
    const auto& w = eval.windows[t];
    const TailModel m = estimate(nets, w);
    const auto d = decluster_runs(extract_exceedances(w, m.threshold), run_gap).deficits;
    if (d.empty()) continue;
    pool.deficits.insert(pool.deficits.end(), d.begin(), d.end());
    pool.params.push_back(m.params);
    pool.weights.push_back(static_cast<double>(d.size()));
    out.windows.push_back(score(d, TailDistribution::gpd(m.params), name, "window:" + std::to_string(t)));
    if (target_per_regime > 0 && pool.deficits.size() >= target_per_regime) pool.full = true;
  }
  for (const auto& [label, pool] : pools) {
    if (pool.deficits.empty()) continue;
    const auto dist = TailDistribution::mixture(pool.params, pool.weights);
    out.groups.push_back(score(pool.deficits, dist, name, "regime:" + std::to_string(label)));
    if (qq) qq->push_back(qq_points(pool.deficits, dist));
  }
  if (out.groups.empty()) throw FitError("no exceedances in the evaluation set", 0);
  out.aggregate = aggregate(out.groups, name);
  return out;
}

ModelEvaluation evaluate_fixed(const std::map<std::size_t, RegimeTail>& tails, const WindowDataset& eval,
                               std::size_t run_gap, const std::string& name, std::size_t target_per_regime,
                               std::vector<QqPoints>* qq) {
  ModelEvaluation out;
  std::map<std::size_t, Pool> pools;
  for (std::size_t t = 0; t < eval.size(); ++t) {
    const auto it = tails.find(eval.regimes[t]);
    if (it == tails.end()) continue;
    Pool& pool = pools[eval.regimes[t]];
    if (pool.full) continue;
    const auto d = decluster_runs(extract_exceedances(eval.windows[t], it->second.threshold), run_gap).deficits;
    if (d.empty()) continue;
    pool.deficits.insert(pool.deficits.end(), d.begin(), d.end());
    out.windows.push_back(score(d, it->second.distribution, name, "window:" + std::to_string(t)));
    if (target_per_regime > 0 && pool.deficits.size() >= target_per_regime) pool.full = true;
  }
  for (const auto& [label, pool] : pools) {
    if (pool.deficits.empty()) continue;
    out.groups.push_back(
        score(pool.deficits, tails.at(label).distribution, name, "regime:" + std::to_string(label)));
    if (qq) qq->push_back(qq_points(pool.deficits, tails.at(label).distribution));
  }
  if (out.groups.empty()) throw FitError("no exceedances in the evaluation set", 0);
  out.aggregate = aggregate(out.groups, name);
  return out;
}

std::map<std::size_t, RegimeTail> fit_mle_per_regime(const WindowDataset& data, double level, std::size_t run_gap) {
  std::map<std::size_t, std::vector<std::size_t>> by_regime;
  for (std::size_t t = 0; t < data.size(); ++t) by_regime[data.regimes[t]].push_back(t);
  std::map<std::size_t, RegimeTail> out;
  for (const auto& [label, rows] : by_regime) {
    std::vector<double> pooled;
    for (const std::size_t t : rows) pooled.insert(pooled.end(), data.windows[t].begin(), data.windows[t].end());
    const double u = stats::quantile(pooled, level);
    std::vector<double> deficits;
    for (const std::size_t t : rows) {
      const auto d = decluster_runs(extract_exceedances(data.windows[t], u), run_gap).deficits;
      deficits.insert(deficits.end(), d.begin(), d.end());
    }
    out[label] = {u, TailDistribution::gpd(fit_gpd_mle(deficits).params)};
  }
  return out;
}

}  // namespace tailgan

namespace tailgan {

std::map<std::size_t, RegimeTail> fit_vanilla_per_regime(const WindowDataset& data,
                                                         const std::map<std::size_t, RegimeTail>& reference,
                                                         const AugmentConfig& cfg, std::uint64_t seed,
                                                         std::vector<std::string>& warnings) {
  std::map<std::size_t, std::vector<double>> samples;
  for (std::size_t t = 0; t < data.size(); ++t) {
    auto& dst = samples[data.regimes[t]];
    dst.insert(dst.end(), data.windows[t].begin(), data.windows[t].end());
  }
  std::map<std::size_t, RegimeTail> out;
  for (const auto& [label, real] : samples) {
    const auto ref = reference.find(label);
    if (ref == reference.end()) continue;
    const std::string tag = "regime " + std::to_string(label);
    if (real.size() < cfg.min_regime_samples) {
      warnings.push_back(tag + ": " + std::to_string(real.size()) + " samples, vanilla GAN skipped");
      continue;
    }
    const VanillaResult trained = train_vanilla_gan(real, cfg, derive_seed(seed, label));
    Rng rng(derive_seed(seed, "vanilla-sample-" + std::to_string(label)));
    const std::vector<double> generated = vanilla_generate(trained.generator, real.size(), rng);
    const double u = ref->second.threshold;
    std::vector<double> deficits;
    for (const double y : generated) {
      if (y < u) deficits.push_back(u - y);
    }
    try {
      out[label] = {u, TailDistribution::gpd(fit_gpd_mle(deficits).params)};
    } catch (const FitError& e) {
      warnings.push_back(tag + ": vanilla GAN tail fit failed: " + e.what());
    }
  }
  return out;
}

}  // namespace tailgan
