#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tailgan/augmentor.hpp"
#include "tailgan/diagnostics.hpp"
#include "tailgan/estimator.hpp"
#include "tailgan/regimes.hpp"

namespace tailgan {

struct SplitConfig {
  std::size_t n_batches = 8;
  std::size_t n_sub = 8;
  std::size_t eval_every = 4;
  std::size_t train_stride = 25;
};

struct RegimeConfig {
  bool enabled = true;
  std::size_t k_min = 1;
  std::size_t k_max = 6;
  GmmOptions options;
};

nlohmann::json to_json(const SplitConfig& cfg);
SplitConfig split_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const RegimeConfig& cfg);
RegimeConfig regime_config_from_json(const nlohmann::json& doc);

struct TrainingData {
  WindowDataset train;  // strided windows of the training sub-batches
  WindowDataset eval;   // non-overlapping windows of the evaluation sub-batches
  WindowDataset train_disjoint;  // non-overlapping windows of the training sub-batches
  std::optional<GmmModel> regimes;
};

// BIC-selected mixture over the non-overlapping windows inside `ranges`.
GmmModel fit_regime_model(std::span<const double> values, std::span<const IndexRange> ranges, std::size_t window,
                          const RegimeConfig& regimes, std::uint64_t seed);

// Per-sample labels from consecutive non-overlapping windows; the remainder
// takes the label of the last full window. All zeros when the stream is
// shorter than one window.
std::vector<std::size_t> label_samples(std::span<const double> values, std::size_t window, const GmmModel& model);

// Splits the stream, cuts windows, fits the regime mixture on non-overlapping
// training windows and labels every window with it.
TrainingData prepare_training_data(std::span<const double> values, const SplitConfig& split,
                                   const RegimeConfig& regimes, std::size_t window, std::uint64_t seed);

struct TrainOutcome {
  Checkpoint checkpoint;
  ThresholdHistory threshold;
  AdversarialHistory adversarial;
  KlHistory kl;
};

// Threshold net (or the constant-threshold ablation), then the parameter net
// by the adversarial or the likelihood objective.
TrainOutcome train_model(const TrainingData& data, const EstimatorConfig& cfg, const std::string& objective,
                         bool constant_threshold, std::uint64_t seed);

// Pooled per-regime evaluation of window estimates. With target_per_regime > 0
// only the first eval windows of each regime are used, up to the first one
// that brings the pooled count to the target. `qq`, when given, receives the
// QQ points of each regime group in group order.
ModelEvaluation evaluate_estimator(const EstimatorNets& nets, const WindowDataset& eval, std::size_t run_gap,
                                   const std::string& name, std::size_t target_per_regime = 0,
                                   std::vector<QqPoints>* qq = nullptr);

// A fixed threshold and deficit distribution per regime, scored on the eval
// windows of that regime.
struct RegimeTail {
  double threshold = 0.0;
  TailDistribution distribution = TailDistribution::gpd({});
};

ModelEvaluation evaluate_fixed(const std::map<std::size_t, RegimeTail>& tails, const WindowDataset& eval,
                               std::size_t run_gap, const std::string& name, std::size_t target_per_regime = 0,
                               std::vector<QqPoints>* qq = nullptr);

// Per-regime MLE at the pooled empirical quantile `level` of the given windows.
std::map<std::size_t, RegimeTail> fit_mle_per_regime(const WindowDataset& data, double level, std::size_t run_gap);

// Per regime, a vanilla GAN trained on the samples of `data`; the tail is the
// MLE of its generated deficits below the reference threshold of that regime.
// Regimes with too few samples or a failed fit are reported in `warnings`.
std::map<std::size_t, RegimeTail> fit_vanilla_per_regime(const WindowDataset& data,
                                                         const std::map<std::size_t, RegimeTail>& reference,
                                                         const AugmentConfig& cfg, std::uint64_t seed,
                                                         std::vector<std::string>& warnings);

}  // namespace tailgan
