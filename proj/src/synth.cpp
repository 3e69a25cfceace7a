#include "tailgan/synth.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "tailgan/errors.hpp"
#include "tailgan/random.hpp"

namespace tailgan {
namespace {

const boost::math::normal kStdNormal;

double normal_cdf(double x) { return boost::math::cdf(kStdNormal, x); }
double normal_sf(double x) { return boost::math::cdf(boost::math::complement(kStdNormal, x)); }

// Sample value for one regime from a uniform driver v in (0, 1): the lowest
// tail_mass of the driver maps to the GPD tail, the rest to the truncated bulk.
double transform(const RegimeSpec& r, double v) {
  if (v < r.tail_mass) {
    // Inverse survival function, so tiny drivers do not round through 1 - v.
    const double log_s = std::log(v / r.tail_mass);
    const double xi = r.tail.shape;
    const double z = std::abs(xi) < kShapeEpsilon ? -r.tail.scale * log_s
                                                  : r.tail.scale / xi * std::expm1(-xi * log_s);
    return r.tail_threshold - z;
  }
  const double w = (v - r.tail_mass) / (1.0 - r.tail_mass);
  const double a = (r.tail_threshold - r.bulk_mean) / r.bulk_std;
  // Upper probability of the bulk quantile, kept in complement form so the
  // far upper end does not round to 1.
  const double upper = (1.0 - w) * normal_sf(a);
  double x = 0.0;
  if (upper <= 0.0) {
    x = a + 40.0;
  } else {
    x = boost::math::quantile(boost::math::complement(kStdNormal, upper));
  }
  return std::max(r.bulk_mean + r.bulk_std * x, r.tail_threshold);
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.regimes.empty()) throw ConfigError("synthetic config needs at least one regime");
  if (!(cfg.ar_coefficient >= 0.0 && cfg.ar_coefficient < 1.0)) {
    throw ConfigError("ar_coefficient must lie in [0, 1)");
  }
  if (!(cfg.sample_period > 0.0) || !std::isfinite(cfg.sample_period)) {
    throw ConfigError("sample_period must be positive");
  }
  for (std::size_t k = 0; k < cfg.regimes.size(); ++k) {
    const auto& r = cfg.regimes[k];
    const std::string where = "regime " + std::to_string(k) + ": ";
    if (!std::isfinite(r.bulk_mean) || !(r.bulk_std > 0.0) || !std::isfinite(r.bulk_std)) {
      throw ConfigError(where + "bulk needs finite mean and std > 0");
    }
    if (!(r.tail_threshold < r.bulk_mean)) throw ConfigError(where + "tail_threshold must lie below bulk_mean");
    if (!(r.tail_mass > 0.0 && r.tail_mass <= 0.2)) throw ConfigError(where + "tail_mass must lie in (0, 0.2]");
    if (!(std::isfinite(r.tail.shape) && r.tail.scale > 0.0 && std::isfinite(r.tail.scale))) {
      throw ConfigError(where + "tail needs finite shape and scale > 0");
    }
    if (r.segment_length == 0) throw ConfigError(where + "segment_length must be positive");
  }
}

nlohmann::json to_json(const SynthConfig& cfg) {
  nlohmann::json regimes = nlohmann::json::array();
  for (const auto& r : cfg.regimes) {
    regimes.push_back({{"bulk_mean", r.bulk_mean},
                       {"bulk_std", r.bulk_std},
                       {"tail_threshold", r.tail_threshold},
                       {"tail_shape", r.tail.shape},
                       {"tail_scale", r.tail.scale},
                       {"tail_mass", r.tail_mass},
                       {"segment_length", r.segment_length}});
  }
  return {{"regimes", regimes},
          {"ar_coefficient", cfg.ar_coefficient},
          {"total_samples", cfg.total_samples},
          {"sample_period", cfg.sample_period},
          {"seed", cfg.seed}};
}

namespace {

template <typename T>
void read_field(const nlohmann::json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& doc, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& item : doc.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace

SynthConfig synth_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("synthetic config must be a JSON object");
  try {
    reject_unknown(doc, {"regimes", "ar_coefficient", "total_samples", "sample_period", "seed"},
                   "synth config");
    SynthConfig cfg;
    if (doc.contains("regimes")) {
      cfg.regimes.clear();
      for (const auto& item : doc.at("regimes")) {
        reject_unknown(item,
                       {"bulk_mean", "bulk_std", "tail_threshold", "tail_shape", "tail_scale",
                        "tail_mass", "segment_length"},
                       "regime");
        RegimeSpec r;
        read_field(item, "bulk_mean", r.bulk_mean);
        read_field(item, "bulk_std", r.bulk_std);
        read_field(item, "tail_threshold", r.tail_threshold);
        read_field(item, "tail_shape", r.tail.shape);
        read_field(item, "tail_scale", r.tail.scale);
        read_field(item, "tail_mass", r.tail_mass);
        read_field(item, "segment_length", r.segment_length);
        cfg.regimes.push_back(r);
      }
    }
    read_field(doc, "ar_coefficient", cfg.ar_coefficient);
    read_field(doc, "total_samples", cfg.total_samples);
    read_field(doc, "sample_period", cfg.sample_period);
    read_field(doc, "seed", cfg.seed);
    validate(cfg);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
}

nlohmann::json SyntheticStream::ground_truth() const {
  nlohmann::json regimes = nlohmann::json::array();
  for (std::size_t k = 0; k < config.regimes.size(); ++k) {
    const auto& r = config.regimes[k];
    regimes.push_back({{"regime", k},
                       {"threshold", r.tail_threshold},
                       {"shape", r.tail.shape},
                       {"scale", r.tail.scale},
                       {"tail_mass", r.tail_mass},
                       {"bulk_mean", r.bulk_mean},
                       {"bulk_std", r.bulk_std}});
  }
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : segments) segs.push_back({{"begin", s.begin}, {"end", s.end}, {"regime", s.regime}});
  return {{"regimes", regimes}, {"segments", segs}, {"samples", series.size()}};
}

SyntheticStream generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(derive_seed(cfg.seed, "synth"));
  const double rho = cfg.ar_coefficient;
  const double innovation = std::sqrt(1.0 - rho * rho);

  SyntheticStream out;
  out.config = cfg;
  std::vector<double> values;
  values.reserve(cfg.total_samples);
  out.regime_labels.reserve(cfg.total_samples);

  double g = rng.normal();
  std::size_t regime = 0;
  while (values.size() < cfg.total_samples) {
    const auto& spec = cfg.regimes[regime];
    Segment seg{values.size(), std::min(values.size() + spec.segment_length, cfg.total_samples), regime};
    for (std::size_t i = seg.begin; i < seg.end; ++i) {
      if (i > 0) g = rho * g + innovation * rng.normal();
      double v = normal_cdf(g);
      v = std::clamp(v, 1e-300, std::nextafter(1.0, 0.0));
      values.push_back(transform(spec, v));
      out.regime_labels.push_back(regime);
    }
    out.segments.push_back(seg);
    regime = (regime + 1) % cfg.regimes.size();
  }
  out.series = SampleSeries(std::move(values), cfg.sample_period, "synthetic");
  return out;
}

}  // namespace tailgan
