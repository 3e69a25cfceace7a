#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tailgan/batches.hpp"
#include "tailgan/nn/adam.hpp"
#include "tailgan/nn/dense_net.hpp"
#include "tailgan/regimes.hpp"
#include "tailgan/tail_model.hpp"

namespace tailgan {

enum class ThresholdMode { learned, constant };

std::string to_string(ThresholdMode mode);
ThresholdMode threshold_mode_from_string(const std::string& name);

struct EstimatorConfig {
  std::size_t window = 100;  // N_w
  double lambda_tail = 1.0;
  double n_min = 10.0;
  double lr_threshold = 5e-5;
  double lr_generator = 2e-4;
  double lr_discriminator = 4e-4;
  double shape_bound = 0.5;
  std::size_t batch_size = 32;
  std::size_t threshold_epochs = 300;
  std::size_t adversarial_epochs = 100;
  std::size_t patience = 10;         // early stopping, in epochs
  std::size_t plateau_patience = 5;  // lr halving for the threshold net
  double bandwidth = 0.25;           // soft-count bandwidth h, dB
  std::optional<double> outage_threshold;  // x_th, dB
  std::size_t run_gap = 0;                 // declustering gap inside windows
  double max_grad_norm = 5.0;
  std::size_t validation_every = 10;  // every k-th training window validates
  ThresholdMode threshold_mode = ThresholdMode::learned;
};

// Throws ConfigError.
void validate(const EstimatorConfig& cfg);
nlohmann::json to_json(const EstimatorConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
EstimatorConfig estimator_config_from_json(const nlohmann::json& doc);

struct WindowDataset {
  std::vector<std::vector<double>> windows;
  std::vector<std::size_t> regimes;  // one label per window

  std::size_t size() const noexcept { return windows.size(); }
};

// Windows of length `window` every `stride` samples inside each range. Each
// window takes the majority of `sample_regimes` when given, else label 0.
WindowDataset make_windows(std::span<const double> values, std::span<const IndexRange> ranges,
                           std::size_t window, std::size_t stride,
                           std::span<const std::size_t> sample_regimes = {});

// Relabels every window with its GMM regime.
void assign_regimes(WindowDataset& dataset, const GmmModel& model);

// Median of the per-window interquartile ranges; 1 when that is not positive.
double fit_input_scale(const WindowDataset& dataset);

struct EstimatorNets {
  nn::DenseNet threshold_net;  // N_w -> 64 -> 64 -> 1
  nn::DenseNet param_net;      // N_w -> 64 -> 64 -> 2
  nn::DenseNet discriminator;  // 1 -> 128 -> 128 -> 1
  double input_scale = 1.0;
  double shape_bound = 0.5;
  ThresholdMode threshold_mode = ThresholdMode::learned;
  double constant_threshold = 0.0;  // used in constant mode
};

EstimatorNets init_nets(const EstimatorConfig& cfg, double input_scale, std::uint64_t seed);

// Net input of one window: sorted values minus the window median, divided by
// the shared input scale.
nn::Vector window_input(std::span<const double> window, double input_scale);
nn::Matrix window_inputs(const std::vector<std::vector<double>>& windows,
                         std::span<const std::size_t> rows, double input_scale);

// u = w_min + sigmoid(raw) (w_median - w_min), kept strictly below the median.
double threshold_from_raw(double raw, double window_min, double window_median);
double predict_threshold(const EstimatorNets& nets, std::span<const double> window);

// xi = bound tanh(o1), beta = softplus(o2) + 1e-6, with |xi| < bound strictly.
GpdParams map_param_outputs(double o1, double o2, double shape_bound = 0.5);
GpdParams param_forward(const EstimatorNets& nets, std::span<const double> window);

// Full query path. The regime label is filled when a regime model is given.
TailModel estimate(const EstimatorNets& nets, std::span<const double> window,
                   const GmmModel* regimes = nullptr);

// Exceedances of one window frozen at a threshold, with their provisional fit.
struct FrozenWindow {
  double threshold = 0.0;
  std::vector<double> members;           // sample values below the threshold
  std::optional<GpdParams> provisional;  // absent with fewer than 2 members
};

// Moments fit for >= 5 members, exponential fit (shape 0, scale = mean) for
// 2-4 members or degenerate moments, nothing below 2.
std::optional<GpdParams> provisional_fit(std::span<const double> deficits);

FrozenWindow freeze_window(std::span<const double> window, double threshold, std::size_t run_gap);

// Soft exceedance count sum_i sigmoid((u - y_i) / h) and its u-derivative.
struct SoftCount {
  double value = 0.0;
  double d_threshold = 0.0;
};
SoftCount soft_count(std::span<const double> window, double threshold, double bandwidth);

// max(0, n_min - c)^2
double tail_penalty(double soft_count, double n_min);

// -sum log g(u - y; params) over the members, and its u-derivative.
struct FitTerm {
  double value = 0.0;
  double d_threshold = 0.0;
};
FitTerm fit_term(std::span<const double> members, double threshold, const GpdParams& params);

struct ThresholdLoss {
  double value = 0.0;  // mean over the batch of fit + lambda * tail
  double fit = 0.0;
  double tail = 0.0;
  nn::Vector grads;  // over threshold_net parameters
};

// Windows are rows of `inputs`; `frozen` carries membership per window.
ThresholdLoss threshold_loss(const EstimatorNets& nets, const std::vector<std::vector<double>>& windows,
                             std::span<const std::size_t> rows, const std::vector<FrozenWindow>& frozen,
                             const EstimatorConfig& cfg);
// Freezes membership at the current thresholds first.
ThresholdLoss threshold_loss(const EstimatorNets& nets, const std::vector<std::vector<double>>& windows,
                             std::span<const std::size_t> rows, const EstimatorConfig& cfg);

struct NetLoss {
  double value = 0.0;
  nn::Vector grads;
};

// BCE(D(log(1+z_real)), 1) + BCE(D(log(1+z_fake)), 0); grads over D.
NetLoss discriminator_loss(const nn::DenseNet& discriminator, std::span<const double> real,
                           std::span<const double> fake);

// BCE(D(log(1+z~)), 1) with z~ drawn pathwise from param_forward of each input
// row using uniforms[t]; grads over param_net.
NetLoss generator_loss(const nn::DenseNet& param_net, const nn::DenseNet& discriminator,
                       const nn::Matrix& inputs, const std::vector<std::vector<double>>& uniforms,
                       double shape_bound);

// Threshold and real deficits of every window at the current threshold net.
struct PreparedWindows {
  nn::Matrix inputs;
  std::vector<double> thresholds;
  std::vector<std::vector<double>> deficits;  // declustered
  std::vector<std::size_t> regimes;
};
PreparedWindows prepare_windows(const EstimatorNets& nets, const WindowDataset& dataset,
                                const EstimatorConfig& cfg);

struct AdversarialState {
  nn::AdamState generator;
  nn::AdamState discriminator;
};
AdversarialState init_adversarial_state(const EstimatorNets& nets, const EstimatorConfig& cfg);

struct StepResult {
  double loss_d = 0.0;
  double loss_g = 0.0;
  bool skipped = false;  // no exceedances in the batch
};

StepResult adversarial_step(EstimatorNets& nets, AdversarialState& state, const PreparedWindows& data,
                            std::span<const std::size_t> batch, const EstimatorConfig& cfg, Rng& rng);

// Mini-batches of window indices, each from a single regime, interleaved
// round-robin across regimes.
std::vector<std::vector<std::size_t>> stratified_batches(std::span<const std::size_t> indices,
                                                         std::span<const std::size_t> regimes,
                                                         std::size_t batch_size, Rng& rng);

struct ThresholdEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double learning_rate = 0.0;
};

struct ThresholdHistory {
  std::vector<ThresholdEpoch> epochs;
  std::size_t best_epoch = 0;
};

// Trains nets.threshold_net in place and leaves the best-validation weights.
// Throws NumericalError on a non-finite loss and FitError below 100 windows.
ThresholdHistory train_threshold_net(EstimatorNets& nets, const WindowDataset& dataset,
                                     const EstimatorConfig& cfg, std::uint64_t seed);

// Constant-threshold ablation: pooled training quantile at level n_min / N_w.
void use_constant_threshold(EstimatorNets& nets, const WindowDataset& dataset, const EstimatorConfig& cfg);

struct AdversarialEpoch {
  std::size_t epoch = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double validation_ks = 0.0;
};

struct AdversarialHistory {
  std::vector<AdversarialEpoch> epochs;
  std::size_t best_epoch = 0;
  bool diverged = false;
};

// Alternating 1:1 discriminator/generator steps over regime-stratified
// batches. Leaves the best-validation-KS param_net and discriminator.
AdversarialHistory train_estimator(EstimatorNets& nets, const WindowDataset& dataset,
                                   const EstimatorConfig& cfg, std::uint64_t seed);

// Per-window GPD NLL of the real deficits under param_net (mean per deficit).
NetLoss kl_loss(const nn::DenseNet& param_net, const nn::Matrix& inputs,
                const std::vector<std::vector<double>>& deficits, double shape_bound);

struct KlEpoch {
  std::size_t epoch = 0;
  double loss = 0.0;
  double validation_ks = 0.0;
};

struct KlHistory {
  std::vector<KlEpoch> epochs;
  std::size_t best_epoch = 0;
};

KlHistory train_param_net_kl(EstimatorNets& nets, const WindowDataset& dataset,
                             const EstimatorConfig& cfg, std::uint64_t seed);

// Count-weighted KS of pooled deficits per regime against the mixture of the
// per-window GPD estimates; the aggregate over regimes.
double validation_ks(const EstimatorNets& nets, const PreparedWindows& data,
                     std::span<const std::size_t> rows);

struct Checkpoint {
  std::string objective = "adversarial";  // or "kl"
  EstimatorConfig config;
  EstimatorNets nets;
  std::optional<GmmModel> regimes;
};

nlohmann::json to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

}  // namespace tailgan
