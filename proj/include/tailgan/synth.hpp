#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "tailgan/gpd.hpp"
#include "tailgan/series.hpp"

namespace tailgan {

// One stationary regime of a synthetic stream. Below tail_threshold the
// deficits are exactly GPD(tail) with mass tail_mass; above it the bulk is a
// Gaussian in dB truncated to [tail_threshold, inf).
struct RegimeSpec {
  double bulk_mean = -60.0;
  double bulk_std = 2.5;
  double tail_threshold = -62.5;
  GpdParams tail{0.2, 1.0};
  double tail_mass = 0.1;
  std::size_t segment_length = 2000;
};

struct SynthConfig {
  std::vector<RegimeSpec> regimes{RegimeSpec{}};
  double ar_coefficient = 0.0;  // AR(1) on the Gaussian driver, in [0, 1)
  std::size_t total_samples = 16000;
  double sample_period = 0.002;  // seconds
  std::uint64_t seed = 1;
};

// Throws ConfigError.
void validate(const SynthConfig& cfg);

nlohmann::json to_json(const SynthConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(const nlohmann::json& doc);

struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t regime = 0;
};

struct SyntheticStream {
  SampleSeries series;
  std::vector<std::size_t> regime_labels;  // one per sample
  std::vector<Segment> segments;
  SynthConfig config;

  nlohmann::json ground_truth() const;
};

// Segments cycle through the regimes in order until total_samples is reached.
SyntheticStream generate_synthetic(const SynthConfig& cfg);

}  // namespace tailgan
