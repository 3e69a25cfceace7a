#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tailgan/csv.hpp"
#include "tailgan/gpd.hpp"
#include "tailgan/nn/dense_net.hpp"

namespace tailgan {

struct AugmentConfig {
  std::size_t batch_size = 1024;
  std::size_t epochs = 50;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::size_t latent_dim = 16;
  bool per_regime = true;
  double tail_level = 0.05;  // empirical quantile that sets the threshold u
  std::size_t run_gap = 10;  // declustering gap for the tail fit
  double ratio = 1.0;        // synthetic-to-real
  std::size_t min_regime_samples = 10000;
  double max_grad_norm = 5.0;
};

void validate(const AugmentConfig& cfg);
nlohmann::json to_json(const AugmentConfig& cfg);
AugmentConfig augment_config_from_json(const nlohmann::json& doc);

// Bulk samples are u + scale * softplus(g(eps)); tail samples are u - z with
// z ~ GPD(tail). scale and center standardize the data space for the nets.
struct HybridGenerator {
  nn::DenseNet bulk_net;  // latent -> 64 -> 64 -> 1
  double threshold = 0.0;
  GpdParams tail;
  double tail_probability = 0.0;  // p_u
  double center = 0.0;
  double scale = 1.0;
};

struct VanillaGenerator {
  nn::DenseNet net;  // samples are center + scale * g(eps)
  double center = 0.0;
  double scale = 1.0;
};

struct GeneratedSamples {
  std::vector<double> values;
  std::vector<bool> tail_branch;
};

GeneratedSamples hybrid_generate(const HybridGenerator& gen, std::size_t n, Rng& rng);
std::vector<double> vanilla_generate(const VanillaGenerator& gen, std::size_t n, Rng& rng);

struct GanEpoch {
  std::size_t epoch = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
};

// Tail parameters from the data: u at the tail_level quantile, MLE on the
// declustered deficits, p_u as the fraction strictly below u. The bulk net is
// freshly initialized.
HybridGenerator fit_hybrid_tail(std::span<const double> real, const AugmentConfig& cfg, std::uint64_t seed);

// Adversarial training of the bulk net with the tail branch active.
std::vector<GanEpoch> train_bulk(HybridGenerator& gen, std::span<const double> real, const AugmentConfig& cfg,
                                 std::uint64_t seed);

struct RegimeGenerator {
  std::size_t regime = 0;
  std::size_t real_count = 0;
  HybridGenerator generator;
  std::vector<GanEpoch> history;
};

struct AugmentorResult {
  std::vector<RegimeGenerator> generators;
  std::vector<std::size_t> skipped;  // regimes with too little data
  std::vector<std::string> warnings;
};

// One generator per regime label (or a single global one when per_regime is
// off or labels are empty).
AugmentorResult train_augmentor(std::span<const double> real, std::span<const std::size_t> regime_labels,
                                const AugmentConfig& cfg, std::uint64_t seed);

struct VanillaResult {
  VanillaGenerator generator;
  std::vector<GanEpoch> history;
};

VanillaResult train_vanilla_gan(std::span<const double> real, const AugmentConfig& cfg, std::uint64_t seed);

struct AugmentedDataset {
  std::vector<double> values;
  std::vector<Origin> origins;
  std::vector<std::size_t> regimes;
};

// Real samples followed by ceil(ratio * |real|) synthetic ones, split across
// the trained regimes in proportion to their real sample counts.
AugmentedDataset build_augmented_dataset(std::span<const double> real, std::span<const std::size_t> regime_labels,
                                         const AugmentorResult& generators, double ratio, Rng& rng);

nlohmann::json to_json(const HybridGenerator& gen);
HybridGenerator hybrid_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const VanillaGenerator& gen);
VanillaGenerator vanilla_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const AugmentorResult& result);
AugmentorResult augmentor_from_json(const nlohmann::json& doc);

}  // namespace tailgan
