#include "tailgan/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tailgan/csv.hpp"
#include "tailgan/errors.hpp"
#include "tailgan/stats.hpp"

namespace tailgan {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TailDistribution TailDistribution::gpd(GpdParams params) {
  validate(params);
  TailDistribution d;
  d.kind_ = Kind::gpd;
  d.components_ = {params};
  d.weights_ = {1.0};
  return d;
}

TailDistribution TailDistribution::mixture(std::vector<GpdParams> components, std::vector<double> weights) {
  if (components.empty() || components.size() != weights.size()) {
    throw DimensionError("mixture needs one weight per component");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    validate(components[k]);
    if (!(weights[k] >= 0.0) || !std::isfinite(weights[k])) throw DomainError("mixture weights must be >= 0");
    total += weights[k];
  }
  if (!(total > 0.0)) throw DomainError("mixture weights sum to zero");
  for (double& w : weights) w /= total;
  TailDistribution d;
  d.kind_ = Kind::mixture;
  d.components_ = std::move(components);
  d.weights_ = std::move(weights);
  return d;
}

TailDistribution TailDistribution::empirical(std::vector<double> deficits) {
  if (deficits.empty()) throw FitError("empirical distribution needs samples", 0);
  TailDistribution d;
  d.kind_ = Kind::empirical;
  std::sort(deficits.begin(), deficits.end());
  d.sorted_ = std::move(deficits);
  return d;
}

double TailDistribution::cdf(double z) const {
  switch (kind_) {
    case Kind::gpd:
      return z < 0.0 ? 0.0 : gpd_cdf(z, components_.front());
    case Kind::mixture: {
      if (z < 0.0) return 0.0;
      double s = 0.0;
      for (std::size_t k = 0; k < components_.size(); ++k) s += weights_[k] * gpd_cdf(z, components_[k]);
      return std::min(s, 1.0);
    }
    case Kind::empirical: {
      const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), z);
      return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
    }
  }
  return 0.0;
}

double TailDistribution::quantile(double p) const {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("quantile level must lie in [0, 1)");
  switch (kind_) {
    case Kind::gpd:
      return gpd_quantile(p, components_.front());
    case Kind::mixture: {
      double lo = std::numeric_limits<double>::infinity();
      double hi = 0.0;
      for (const auto& c : components_) {
        const double q = gpd_quantile(p, c);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
      }
      for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    case Kind::empirical:
      return stats::quantile_sorted(sorted_, p);
  }
  return 0.0;
}

QqPoints qq_points(std::span<const double> deficits, const TailDistribution& model) {
  const std::size_t n = deficits.size();
  if (n < 2) throw FitError("QQ points need at least 2 exceedances", n);
  QqPoints qq;
  qq.empirical = stats::sorted_copy(deficits);
  qq.model.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    qq.model.push_back(model.quantile((static_cast<double>(i) - 0.5) / static_cast<double>(n)));
  }
  return qq;
}

QqPoints qq_points(std::span<const double> deficits, const GpdParams& model) {
  return qq_points(deficits, TailDistribution::gpd(model));
}

QqPoints qq_points(const ExceedanceSet& exceedances, const GpdParams& model) {
  return qq_points(exceedances.deficits, model);
}

double ks_statistic(std::span<const double> deficits, const std::function<double(double)>& cdf) {
  const std::size_t n = deficits.size();
  if (n == 0) throw FitError("KS statistic needs at least one sample", 0);
  const auto sorted = stats::sorted_copy(deficits);
  const double nn = static_cast<double>(n);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / nn - f, f - static_cast<double>(i) / nn});
  }
  return std::clamp(d, 0.0, 1.0);
}

double ks_statistic(std::span<const double> deficits, const TailDistribution& model) {
  return ks_statistic(deficits, [&model](double z) { return model.cdf(z); });
}

double ks_statistic(std::span<const double> deficits, const GpdParams& model) {
  validate(model);
  return ks_statistic(deficits, [&model](double z) { return z < 0.0 ? 0.0 : gpd_cdf(z, model); });
}

double ks_statistic(const ExceedanceSet& exceedances, const GpdParams& model) {
  return ks_statistic(exceedances.deficits, model);
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw FitError("two-sample KS needs two non-empty samples", 0);
  const auto sa = stats::sorted_copy(a);
  const auto sb = stats::sorted_copy(b);
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

QuantileErrors quantile_errors(const QqPoints& qq) {
  if (qq.size() == 0 || qq.model.size() != qq.empirical.size()) {
    throw DimensionError("QQ coordinate lists must be non-empty and of equal length");
  }
  double se = 0.0;
  double ae = 0.0;
  for (std::size_t i = 0; i < qq.size(); ++i) {
    const double e = qq.model[i] - qq.empirical[i];
    se += e * e;
    ae += std::abs(e);
  }
  const double n = static_cast<double>(qq.size());
  QuantileErrors out;
  out.mse = se / n;
  out.rmse = std::sqrt(out.mse);
  out.mae = ae / n;
  return out;
}

double ppcc(const QqPoints& qq) {
  const std::size_t n = qq.size();
  if (n < 3 || qq.model.size() != n) throw FitError("PPCC needs at least 3 QQ points", n);
  const double mx = stats::mean(qq.empirical);
  const double my = stats::mean(qq.model);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = qq.empirical[i] - mx;
    const double dy = qq.model[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw FitError("PPCC is undefined for constant coordinates", n);
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

DiagnosticsReport score(std::span<const double> deficits, const TailDistribution& model,
                        std::string model_name, std::string scope) {
  DiagnosticsReport r;
  r.model = std::move(model_name);
  r.scope = std::move(scope);
  r.n = deficits.size();
  r.ks = ks_statistic(deficits, model);
  if (r.n >= 2) {
    const QqPoints qq = qq_points(deficits, model);
    const QuantileErrors e = quantile_errors(qq);
    r.mse = e.mse;
    r.rmse = e.rmse;
    r.mae = e.mae;
    try {
      r.ppcc = ppcc(qq);
    } catch (const FitError&) {
      r.ppcc = kNaN;
    }
  } else {
    r.mse = r.rmse = r.mae = r.ppcc = kNaN;
  }
  return r;
}

DiagnosticsReport aggregate(std::span<const DiagnosticsReport> groups, std::string model_name) {
  DiagnosticsReport out;
  out.model = std::move(model_name);
  out.scope = "all";
  double w_all = 0.0;
  double w_ppcc = 0.0;
  for (const auto& g : groups) {
    const double w = static_cast<double>(g.n);
    out.n += g.n;
    w_all += w;
    out.ks += w * g.ks;
    out.mse += w * g.mse;
    out.mae += w * g.mae;
    if (std::isfinite(g.ppcc)) {
      out.ppcc += w * g.ppcc;
      w_ppcc += w;
    }
  }
  if (!(w_all > 0.0)) throw FitError("no exceedances to aggregate", 0);
  out.ks /= w_all;
  out.mse /= w_all;
  out.mae /= w_all;
  out.rmse = std::sqrt(out.mse);
  out.ppcc = w_ppcc > 0.0 ? out.ppcc / w_ppcc : kNaN;
  return out;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

double number_or_nan(const nlohmann::json& v) { return v.is_null() ? kNaN : v.get<double>(); }

}  // namespace

nlohmann::json to_json(const DiagnosticsReport& r) {
  return {{"model", r.model},
          {"scope", r.scope},
          {"n", r.n},
          {"ks", number_or_null(r.ks)},
          {"mse", number_or_null(r.mse)},
          {"rmse", number_or_null(r.rmse)},
          {"mae", number_or_null(r.mae)},
          {"ppcc", number_or_null(r.ppcc)}};
}

DiagnosticsReport report_from_json(const nlohmann::json& doc) {
  try {
    DiagnosticsReport r;
    r.model = doc.at("model").get<std::string>();
    r.scope = doc.at("scope").get<std::string>();
    r.n = doc.at("n").get<std::size_t>();
    r.ks = number_or_nan(doc.at("ks"));
    r.mse = number_or_nan(doc.at("mse"));
    r.rmse = number_or_nan(doc.at("rmse"));
    r.mae = number_or_nan(doc.at("mae"));
    r.ppcc = number_or_nan(doc.at("ppcc"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed diagnostics report: ") + e.what());
  }
}

nlohmann::json to_json(const ModelEvaluation& evaluation) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : evaluation.groups) groups.push_back(to_json(g));
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : evaluation.windows) windows.push_back(to_json(w));
  return {{"aggregate", to_json(evaluation.aggregate)}, {"groups", groups}, {"windows", windows}};
}

ModelEvaluation evaluation_from_json(const nlohmann::json& doc) {
  try {
    ModelEvaluation e;
    e.aggregate = report_from_json(doc.at("aggregate"));
    for (const auto& g : doc.at("groups")) e.groups.push_back(report_from_json(g));
    for (const auto& w : doc.at("windows")) e.windows.push_back(report_from_json(w));
    return e;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed evaluation: ") + e.what());
  }
}

std::string to_csv_row(const DiagnosticsReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); };
  std::ostringstream os;
  os << r.model << ',' << r.scope << ',' << r.n << ',' << num(r.ks) << ',' << num(r.mse) << ','
     << num(r.rmse) << ',' << num(r.mae) << ',' << num(r.ppcc);
  return os.str();
}

std::string qq_to_csv(const QqPoints& qq) {
  std::ostringstream os;
  os << "empirical,model\n";
  for (std::size_t i = 0; i < qq.size(); ++i) {
    os << format_double(qq.empirical[i]) << ',' << format_double(qq.model[i]) << '\n';
  }
  return os.str();
}

}  // namespace tailgan
