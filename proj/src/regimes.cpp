#include "tailgan/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tailgan/errors.hpp"
#include "tailgan/random.hpp"
#include "tailgan/stats.hpp"

namespace tailgan {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2 pi)

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (const double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

struct Standardized {
  nn::Matrix points;
  std::vector<double> center;
  std::vector<double> spread;
};

Standardized standardize(const FeatureMatrix& raw) {
  const auto n = raw.rows();
  const auto d = raw.cols();
  Standardized out{raw, std::vector<double>(d), std::vector<double>(d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    const double m = raw.col(j).mean();
    const double var = (raw.col(j).array() - m).square().sum() / static_cast<double>(n);
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    out.center[j] = m;
    out.spread[j] = sd;
    out.points.col(j) = (raw.col(j).array() - m) / sd;
  }
  return out;
}

// Per-component log densities (plus log weight) of one standardized point.
void component_log_terms(const GmmModel& model, const double* x, std::vector<double>& out) {
  out.resize(model.components);
  for (std::size_t k = 0; k < model.components; ++k) {
    double s = std::log(model.weights[k]);
    for (std::size_t j = 0; j < model.dims; ++j) {
      const double v = model.variances[k][j];
      const double diff = x[j] - model.means[k][j];
      s -= 0.5 * (kLog2Pi + std::log(v) + diff * diff / v);
    }
    out[k] = s;
  }
}

// E-step: responsibilities (n x K) and the log-likelihood.
double expectation(const GmmModel& model, const nn::Matrix& x, nn::Matrix& resp) {
  const auto n = x.rows();
  resp.resize(n, static_cast<Eigen::Index>(model.components));
  std::vector<double> terms;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    component_log_terms(model, x.row(i).data(), terms);
    const double lse = log_sum_exp(terms);
    ll += lse;
    for (std::size_t k = 0; k < model.components; ++k) {
      resp(i, static_cast<Eigen::Index>(k)) = std::exp(terms[k] - lse);
    }
  }
  return ll;
}

void maximization(GmmModel& model, const nn::Matrix& x, const nn::Matrix& resp, double floor) {
  const auto n = static_cast<double>(x.rows());
  for (std::size_t k = 0; k < model.components; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double nk = std::max(resp.col(kk).sum(), 1e-12);
    model.weights[k] = nk / n;
    for (std::size_t j = 0; j < model.dims; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double mu = resp.col(kk).dot(x.col(jj)) / nk;
      const double var = resp.col(kk).dot((x.col(jj).array() - mu).square().matrix()) / nk;
      model.means[k][j] = mu;
      model.variances[k][j] = std::max(var, floor);
    }
  }
  // Keep the simplex exact.
  double total = 0.0;
  for (const double w : model.weights) total += w;
  for (double& w : model.weights) w /= total;
}

// k-means++ seeding followed by a hard-assignment M-step.
GmmModel initialize(const nn::Matrix& x, std::size_t components, Rng& rng, double floor) {
  const auto n = x.rows();
  std::vector<Eigen::Index> centers{static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)))};
  std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  while (centers.size() < components) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d2 = (x.row(i) - x.row(centers.back())).squaredNorm();
      dist[i] = std::min(dist[i], d2);
      total += dist[i];
    }
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= dist[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    }
    centers.push_back(pick);
  }

  nn::Matrix resp = nn::Matrix::Zero(n, static_cast<Eigen::Index>(components));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < components; ++k) {
      const double d2 = (x.row(i) - x.row(centers[k])).squaredNorm();
      if (d2 < best_d) {
        best_d = d2;
        best = static_cast<Eigen::Index>(k);
      }
    }
    resp(i, best) = 1.0;
  }

  GmmModel model;
  model.components = components;
  model.dims = static_cast<std::size_t>(x.cols());
  model.weights.assign(components, 1.0 / static_cast<double>(components));
  model.means.assign(components, std::vector<double>(model.dims, 0.0));
  model.variances.assign(components, std::vector<double>(model.dims, 1.0));
  maximization(model, x, resp, floor);
  return model;
}

GmmModel run_em(const nn::Matrix& x, GmmModel model, const GmmOptions& options) {
  nn::Matrix resp;
  double ll = expectation(model, x, resp);
  model.log_likelihood_trace = {ll};
  std::size_t it = 0;
  for (; it < options.max_iterations; ++it) {
    GmmModel next = model;
    maximization(next, x, resp, options.variance_floor);
    nn::Matrix next_resp;
    const double next_ll = expectation(next, x, next_resp);
    if (!std::isfinite(next_ll)) break;
    model = std::move(next);
    resp = std::move(next_resp);
    model.log_likelihood_trace.push_back(next_ll);
    const double gain = next_ll - ll;
    ll = next_ll;
    if (gain < options.tolerance) {
      ++it;
      break;
    }
  }
  model.log_likelihood = ll;
  model.iterations = it;
  return model;
}

}  // namespace

std::vector<double> GmmModel::mean_in_feature_units(std::size_t k) const {
  std::vector<double> out(dims);
  for (std::size_t j = 0; j < dims; ++j) out[j] = center[j] + spread[j] * means.at(k)[j];
  return out;
}

std::vector<double> GmmModel::variance_in_feature_units(std::size_t k) const {
  std::vector<double> out(dims);
  for (std::size_t j = 0; j < dims; ++j) out[j] = spread[j] * spread[j] * variances.at(k)[j];
  return out;
}

WindowFeatures featurize(std::span<const double> window) {
  if (window.size() < kMinFeatureWindow) {
    throw DomainError("feature window needs at least " + std::to_string(kMinFeatureWindow) +
                      " samples");
  }
  const auto sorted = stats::sorted_copy(window);
  WindowFeatures f;
  if (sorted.front() == sorted.back()) {
    f.values = {sorted.front(), 0.0, sorted.front(), sorted.front(), sorted.front()};
    return f;
  }
  // Clamping only removes summation rounding.
  const double mean = std::clamp(stats::mean(window), sorted.front(), sorted.back());
  f.values = {mean, std::sqrt(stats::sample_variance(window)), stats::quantile_sorted(sorted, 0.05),
              stats::quantile_sorted(sorted, 0.01), sorted.front()};
  return f;
}

FeatureMatrix to_matrix(std::span<const WindowFeatures> features) {
  FeatureMatrix m(static_cast<Eigen::Index>(features.size()), WindowFeatures::kDims);
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t j = 0; j < WindowFeatures::kDims; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features[i].values[j];
    }
  }
  return m;
}

double gmm_bic(double log_likelihood, std::size_t components, std::size_t dims, std::size_t n) {
  const double p = static_cast<double>(components - 1 + 2 * components * dims);
  return -2.0 * log_likelihood + p * std::log(static_cast<double>(n));
}

GmmModel fit_gmm_em(const FeatureMatrix& points, std::size_t components, std::uint64_t seed,
                    const GmmOptions& options) {
  if (components < 1) throw DomainError("a mixture needs at least one component");
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 5 * components) throw FitError("need at least 5 feature vectors per component", n);
  if (points.cols() < 1 || !points.allFinite()) throw FitError("feature vectors must be finite", n);

  const Standardized data = standardize(points);
  GmmModel best;
  best.log_likelihood = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(options.restarts, 1); ++r) {
    Rng rng(derive_seed(seed, r));
    GmmModel model = run_em(data.points, initialize(data.points, components, rng, options.variance_floor),
                            options);
    if (model.log_likelihood > best.log_likelihood) best = std::move(model);
  }
  if (!std::isfinite(best.log_likelihood)) throw FitError("no restart produced a usable mixture", n);
  best.center = data.center;
  best.spread = data.spread;
  best.bic = gmm_bic(best.log_likelihood, components, best.dims, n);
  return best;
}

GmmModel fit_gmm_em(std::span<const WindowFeatures> features, std::size_t components,
                    std::uint64_t seed, const GmmOptions& options) {
  return fit_gmm_em(to_matrix(features), components, seed, options);
}

BicSelection select_k_bic(const FeatureMatrix& points, std::span<const std::size_t> candidates,
                          std::uint64_t seed, const GmmOptions& options) {
  if (candidates.empty()) throw DomainError("component-count range is empty");
  BicSelection out;
  for (const std::size_t k : candidates) {
    GmmModel model = fit_gmm_em(points, k, derive_seed(seed, k), options);
    out.bic.push_back(model.bic);
    const bool better = out.components == 0 || model.bic < out.model.bic ||
                        (model.bic == out.model.bic && k < out.components);
    if (better) {
      out.components = k;
      out.model = std::move(model);
    }
  }
  return out;
}

BicSelection select_k_bic(std::span<const WindowFeatures> features,
                          std::span<const std::size_t> candidates, std::uint64_t seed,
                          const GmmOptions& options) {
  return select_k_bic(to_matrix(features), candidates, seed, options);
}

RegimeAssignment assign_regime(const GmmModel& model, std::span<const double> point) {
  if (point.size() != model.dims) throw DimensionError("feature dimension does not match the model");
  std::vector<double> x(model.dims);
  for (std::size_t j = 0; j < model.dims; ++j) x[j] = (point[j] - model.center[j]) / model.spread[j];
  std::vector<double> terms;
  component_log_terms(model, x.data(), terms);
  const double lse = log_sum_exp(terms);
  RegimeAssignment out;
  out.responsibilities.resize(model.components);
  for (std::size_t k = 0; k < model.components; ++k) out.responsibilities[k] = std::exp(terms[k] - lse);
  out.label = static_cast<std::size_t>(
      std::max_element(out.responsibilities.begin(), out.responsibilities.end()) -
      out.responsibilities.begin());
  return out;
}

RegimeAssignment assign_regime(const GmmModel& model, const WindowFeatures& features) {
  return assign_regime(model, std::span<const double>(features.values));
}

nlohmann::json to_json(const GmmModel& model) {
  return {{"components", model.components}, {"dims", model.dims},
          {"weights", model.weights},       {"means", model.means},
          {"variances", model.variances},   {"center", model.center},
          {"spread", model.spread},         {"log_likelihood", model.log_likelihood},
          {"bic", model.bic},               {"iterations", model.iterations}};
}

GmmModel gmm_from_json(const nlohmann::json& doc) {
  try {
    GmmModel m;
    m.components = doc.at("components").get<std::size_t>();
    m.dims = doc.at("dims").get<std::size_t>();
    m.weights = doc.at("weights").get<std::vector<double>>();
    m.means = doc.at("means").get<std::vector<std::vector<double>>>();
    m.variances = doc.at("variances").get<std::vector<std::vector<double>>>();
    m.center = doc.at("center").get<std::vector<double>>();
    m.spread = doc.at("spread").get<std::vector<double>>();
    m.log_likelihood = doc.at("log_likelihood").get<double>();
    m.bic = doc.at("bic").get<double>();
    m.iterations = doc.at("iterations").get<std::size_t>();
    if (m.weights.size() != m.components || m.means.size() != m.components ||
        m.variances.size() != m.components || m.center.size() != m.dims || m.spread.size() != m.dims) {
      throw ConfigError("regime model arrays do not match the declared shape");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed regime model: ") + e.what());
  }
}

}  // namespace tailgan
