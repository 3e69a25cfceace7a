#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "tailgan/nn/dense_net.hpp"

namespace tailgan {

// Tail-sensitive summary of one window of power values (dB).
struct WindowFeatures {
  static constexpr std::size_t kDims = 5;
  std::array<double, kDims> values{};  // mean, std, q5%, q1%, min

  double mean() const { return values[0]; }
  double stddev() const { return values[1]; }
  double q05() const { return values[2]; }
  double q01() const { return values[3]; }
  double min() const { return values[4]; }
};

inline constexpr std::size_t kMinFeatureWindow = 20;

WindowFeatures featurize(std::span<const double> window);

// Diagonal-covariance Gaussian mixture fitted on z-scored features. The
// standardization constants live in the model so assignment works on raw
// feature vectors.
struct GmmModel {
  std::size_t components = 0;
  std::size_t dims = 0;
  std::vector<double> weights;
  std::vector<std::vector<double>> means;      // standardized space
  std::vector<std::vector<double>> variances;  // standardized space
  std::vector<double> center;                  // per-dimension training mean
  std::vector<double> spread;                  // per-dimension training std
  double log_likelihood = 0.0;
  double bic = 0.0;
  std::size_t iterations = 0;
  std::vector<double> log_likelihood_trace;  // best restart, one entry per EM iteration

  // Component mean/variance in the original feature units.
  std::vector<double> mean_in_feature_units(std::size_t k) const;
  std::vector<double> variance_in_feature_units(std::size_t k) const;
};

struct GmmOptions {
  std::size_t restarts = 5;
  std::size_t max_iterations = 500;
  double tolerance = 1e-6;
  double variance_floor = 1e-6;
};

using FeatureMatrix = nn::Matrix;  // one feature vector per row

FeatureMatrix to_matrix(std::span<const WindowFeatures> features);

GmmModel fit_gmm_em(const FeatureMatrix& points, std::size_t components, std::uint64_t seed,
                    const GmmOptions& options = {});
GmmModel fit_gmm_em(std::span<const WindowFeatures> features, std::size_t components,
                    std::uint64_t seed, const GmmOptions& options = {});

// BIC = -2 ll + p ln n with p = K - 1 + 2 K d.
double gmm_bic(double log_likelihood, std::size_t components, std::size_t dims, std::size_t n);

struct BicSelection {
  std::size_t components = 0;
  GmmModel model;
  std::vector<double> bic;  // one per candidate, in candidate order
};

// Argmin BIC over candidates; ties go to the smaller component count.
BicSelection select_k_bic(const FeatureMatrix& points, std::span<const std::size_t> candidates,
                          std::uint64_t seed, const GmmOptions& options = {});
BicSelection select_k_bic(std::span<const WindowFeatures> features,
                          std::span<const std::size_t> candidates, std::uint64_t seed,
                          const GmmOptions& options = {});

struct RegimeAssignment {
  std::size_t label = 0;
  std::vector<double> responsibilities;
};

RegimeAssignment assign_regime(const GmmModel& model, std::span<const double> point);
RegimeAssignment assign_regime(const GmmModel& model, const WindowFeatures& features);

nlohmann::json to_json(const GmmModel& model);
GmmModel gmm_from_json(const nlohmann::json& doc);

}  // namespace tailgan
