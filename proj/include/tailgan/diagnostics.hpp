#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tailgan/exceedance.hpp"
#include "tailgan/gpd.hpp"

namespace tailgan {

// Distribution of lower-tail deficits that diagnostics score against.
class TailDistribution {
 public:
  static TailDistribution gpd(GpdParams params);
  // Mixture of GPDs; weights need not be normalized.
  static TailDistribution mixture(std::vector<GpdParams> components, std::vector<double> weights);
  // Empirical distribution of the given deficits.
  static TailDistribution empirical(std::vector<double> deficits);

  double cdf(double z) const;
  double quantile(double p) const;

 private:
  enum class Kind { gpd, mixture, empirical };
  Kind kind_ = Kind::gpd;
  std::vector<GpdParams> components_;
  std::vector<double> weights_;
  std::vector<double> sorted_;
};

// Paired quantiles at Hazen plotting positions p_i = (i - 0.5) / n.
struct QqPoints {
  std::vector<double> empirical;
  std::vector<double> model;
  std::size_t size() const noexcept { return empirical.size(); }
};

QqPoints qq_points(std::span<const double> deficits, const TailDistribution& model);
QqPoints qq_points(std::span<const double> deficits, const GpdParams& model);
QqPoints qq_points(const ExceedanceSet& exceedances, const GpdParams& model);

// Exact one-sample KS: max over sorted z_(i) of max(i/n - F, F - (i-1)/n).
double ks_statistic(std::span<const double> deficits, const std::function<double(double)>& cdf);
double ks_statistic(std::span<const double> deficits, const TailDistribution& model);
double ks_statistic(std::span<const double> deficits, const GpdParams& model);
double ks_statistic(const ExceedanceSet& exceedances, const GpdParams& model);

// Two-sample KS: sup |F_a - F_b| over the pooled sample.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

struct QuantileErrors {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
};

// Errors of model minus empirical quantile over the QQ pairs.
QuantileErrors quantile_errors(const QqPoints& qq);

// Pearson correlation of the QQ coordinates.
double ppcc(const QqPoints& qq);

struct DiagnosticsReport {
  std::string model;
  std::string scope;  // "all", "regime:<k>" or "window:<t>"
  std::size_t n = 0;  // exceedance count
  double ks = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double ppcc = 0.0;  // NaN when undefined (n < 3 or degenerate variance)

  friend bool operator==(const DiagnosticsReport&, const DiagnosticsReport&) = default;
};

// All metrics for one deficit sample. PPCC is NaN when it is undefined.
DiagnosticsReport score(std::span<const double> deficits, const TailDistribution& model,
                        std::string model_name, std::string scope);

// Exceedance-count-weighted mean of per-group reports.
DiagnosticsReport aggregate(std::span<const DiagnosticsReport> groups, std::string model_name);

struct ModelEvaluation {
  DiagnosticsReport aggregate;
  std::vector<DiagnosticsReport> groups;   // one per regime
  std::vector<DiagnosticsReport> windows;  // per-window breakdown
};

nlohmann::json to_json(const DiagnosticsReport& report);
DiagnosticsReport report_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ModelEvaluation& evaluation);
ModelEvaluation evaluation_from_json(const nlohmann::json& doc);

inline constexpr const char* kReportCsvHeader = "model,scope,n,ks,mse,rmse,mae,ppcc";
std::string to_csv_row(const DiagnosticsReport& report);
std::string qq_to_csv(const QqPoints& qq);

}  // namespace tailgan
