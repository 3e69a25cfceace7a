#include "tailgan/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "tailgan/diagnostics.hpp"
#include "tailgan/errors.hpp"
#include "tailgan/exceedance.hpp"
#include "tailgan/nn/losses.hpp"
#include "tailgan/nn/reparam.hpp"
#include "tailgan/nn/serialization.hpp"
#include "tailgan/stats.hpp"

namespace tailgan {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = std::numbers::ln2;

double sigmoid(double x) { return nn::activate(nn::Activation::sigmoid(), x); }
double softplus(double x) { return nn::activate(nn::Activation::softplus(), x); }

struct WindowSummary {
  double min = 0.0;
  double median = 0.0;
};

WindowSummary summarize(std::span<const double> window) {
  if (window.empty()) throw DimensionError("empty window");
  const auto sorted = stats::sorted_copy(window);
  return {sorted.front(), stats::quantile_sorted(sorted, 0.5)};
}

void check_window(const EstimatorNets& nets, std::span<const double> window) {
  const std::size_t expected =
      nets.param_net.layers().empty() ? window.size() : nets.param_net.input_dim();
  if (window.size() != expected) {
    throw DimensionError("window of length " + std::to_string(window.size()) + " but the nets expect " +
                         std::to_string(expected));
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(std::size_t n,
                                                                                std::size_t every) {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  for (std::size_t i = 0; i < n; ++i) (i % every == every - 1 ? val : train).push_back(i);
  return {train, val};
}

std::vector<double> log1p_all(std::span<const double> z) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::log1p(z[i]);
  return out;
}

nn::Matrix column(std::span<const double> v) {
  nn::Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

nn::Matrix select_rows(const nn::Matrix& m, std::span<const std::size_t> rows) {
  nn::Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace

std::string to_string(ThresholdMode mode) { return mode == ThresholdMode::learned ? "learned" : "constant"; }

ThresholdMode threshold_mode_from_string(const std::string& name) {
  if (name == "learned") return ThresholdMode::learned;
  if (name == "constant") return ThresholdMode::constant;
  throw ConfigError("unknown threshold mode '" + name + "'");
}

void validate(const EstimatorConfig& cfg) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  if (cfg.window < kMinFeatureWindow) {
    throw ConfigError("window must hold at least " + std::to_string(kMinFeatureWindow) + " samples");
  }
  if (!(cfg.lambda_tail >= 0.0) || !std::isfinite(cfg.lambda_tail)) throw ConfigError("lambda_tail must be >= 0");
  if (!(cfg.n_min >= 0.0 && cfg.n_min < static_cast<double>(cfg.window))) {
    throw ConfigError("n_min must lie in [0, window)");
  }
  positive(cfg.lr_threshold, "lr_threshold");
  positive(cfg.lr_generator, "lr_generator");
  positive(cfg.lr_discriminator, "lr_discriminator");
  positive(cfg.bandwidth, "bandwidth");
  positive(cfg.max_grad_norm, "max_grad_norm");
  if (!(cfg.shape_bound > 0.0 && cfg.shape_bound < 1.0)) throw ConfigError("shape_bound must lie in (0, 1)");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (cfg.patience == 0 || cfg.plateau_patience == 0) throw ConfigError("patience values must be positive");
  if (cfg.validation_every < 2) throw ConfigError("validation_every must be at least 2");
  if (cfg.outage_threshold && !std::isfinite(*cfg.outage_threshold)) {
    throw ConfigError("outage_threshold must be finite");
  }
}

nlohmann::json to_json(const EstimatorConfig& cfg) {
  return {{"window", cfg.window},
          {"lambda_tail", cfg.lambda_tail},
          {"n_min", cfg.n_min},
          {"lr_threshold", cfg.lr_threshold},
          {"lr_generator", cfg.lr_generator},
          {"lr_discriminator", cfg.lr_discriminator},
          {"shape_bound", cfg.shape_bound},
          {"batch_size", cfg.batch_size},
          {"threshold_epochs", cfg.threshold_epochs},
          {"adversarial_epochs", cfg.adversarial_epochs},
          {"patience", cfg.patience},
          {"plateau_patience", cfg.plateau_patience},
          {"bandwidth", cfg.bandwidth},
          {"outage_threshold", cfg.outage_threshold ? nlohmann::json(*cfg.outage_threshold) : nlohmann::json()},
          {"run_gap", cfg.run_gap},
          {"max_grad_norm", cfg.max_grad_norm},
          {"validation_every", cfg.validation_every},
          {"threshold_mode", to_string(cfg.threshold_mode)}};
}

EstimatorConfig estimator_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("estimator config must be a JSON object");
  EstimatorConfig cfg;
  try {
    for (const auto& item : doc.items()) {
      const std::string& k = item.key();
      const auto& v = item.value();
      if (k == "window") cfg.window = v.get<std::size_t>();
      else if (k == "lambda_tail") cfg.lambda_tail = v.get<double>();
      else if (k == "n_min") cfg.n_min = v.get<double>();
      else if (k == "lr_threshold") cfg.lr_threshold = v.get<double>();
      else if (k == "lr_generator") cfg.lr_generator = v.get<double>();
      else if (k == "lr_discriminator") cfg.lr_discriminator = v.get<double>();
      else if (k == "shape_bound") cfg.shape_bound = v.get<double>();
      else if (k == "batch_size") cfg.batch_size = v.get<std::size_t>();
      else if (k == "threshold_epochs") cfg.threshold_epochs = v.get<std::size_t>();
      else if (k == "adversarial_epochs") cfg.adversarial_epochs = v.get<std::size_t>();
      else if (k == "patience") cfg.patience = v.get<std::size_t>();
      else if (k == "plateau_patience") cfg.plateau_patience = v.get<std::size_t>();
      else if (k == "bandwidth") cfg.bandwidth = v.get<double>();
      else if (k == "outage_threshold") {
        if (v.is_null()) cfg.outage_threshold.reset();
        else cfg.outage_threshold = v.get<double>();
      }
      else if (k == "run_gap") cfg.run_gap = v.get<std::size_t>();
      else if (k == "max_grad_norm") cfg.max_grad_norm = v.get<double>();
      else if (k == "validation_every") cfg.validation_every = v.get<std::size_t>();
      else if (k == "threshold_mode") cfg.threshold_mode = threshold_mode_from_string(v.get<std::string>());
      else throw ConfigError("estimator config: unknown key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("estimator config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

WindowDataset make_windows(std::span<const double> values, std::span<const IndexRange> ranges,
                           std::size_t window, std::size_t stride,
                           std::span<const std::size_t> sample_regimes) {
  if (window == 0 || stride == 0) throw DomainError("window and stride must be positive");
  if (!sample_regimes.empty() && sample_regimes.size() != values.size()) {
    throw DimensionError("regime labels do not match the series length");
  }
  WindowDataset out;
  for (const auto& r : ranges) {
    if (r.end > values.size() || r.begin > r.end) throw DomainError("window range outside the series");
    for (std::size_t start = r.begin; start + window <= r.end; start += stride) {
      out.windows.emplace_back(values.begin() + static_cast<std::ptrdiff_t>(start),
                               values.begin() + static_cast<std::ptrdiff_t>(start + window));
      std::size_t label = 0;
      if (!sample_regimes.empty()) {
        std::map<std::size_t, std::size_t> counts;
        for (std::size_t i = start; i < start + window; ++i) ++counts[sample_regimes[i]];
        std::size_t best = 0;
        for (const auto& [k, c] : counts) {
          if (c > best) {
            best = c;
            label = k;
          }
        }
      }
      out.regimes.push_back(label);
    }
  }
  return out;
}

void assign_regimes(WindowDataset& dataset, const GmmModel& model) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    dataset.regimes[i] = assign_regime(model, featurize(dataset.windows[i])).label;
  }
}

double fit_input_scale(const WindowDataset& dataset) {
  if (dataset.windows.empty()) return 1.0;
  std::vector<double> iqr;
  iqr.reserve(dataset.size());
  for (const auto& w : dataset.windows) {
    const auto s = stats::sorted_copy(w);
    iqr.push_back(stats::quantile_sorted(s, 0.75) - stats::quantile_sorted(s, 0.25));
  }
  const double m = stats::median(iqr);
  return m > 0.0 && std::isfinite(m) ? m : 1.0;
}

EstimatorNets init_nets(const EstimatorConfig& cfg, double input_scale, std::uint64_t seed) {
  validate(cfg);
  if (!(input_scale > 0.0) || !std::isfinite(input_scale)) throw DomainError("input scale must be positive");
  EstimatorNets nets;
  const std::vector<std::size_t> thr{cfg.window, 64, 64, 1};
  const std::vector<std::size_t> par{cfg.window, 64, 64, 2};
  const std::vector<std::size_t> dis{1, 128, 128, 1};
  Rng r1(derive_seed(seed, "threshold_net"));
  Rng r2(derive_seed(seed, "param_net"));
  Rng r3(derive_seed(seed, "discriminator"));
  nets.threshold_net = nn::DenseNet::create(thr, nn::Activation::relu(), nn::Activation::identity(), r1);
  nets.param_net = nn::DenseNet::create(par, nn::Activation::relu(), nn::Activation::identity(), r2);
  nets.discriminator =
      nn::DenseNet::create(dis, nn::Activation::leaky_relu(0.01), nn::Activation::identity(), r3);
  nets.input_scale = input_scale;
  nets.shape_bound = cfg.shape_bound;
  nets.threshold_mode = ThresholdMode::learned;
  return nets;
}

nn::Vector window_input(std::span<const double> window, double input_scale) {
  const auto sorted = stats::sorted_copy(window);
  const double med = stats::quantile_sorted(sorted, 0.5);
  nn::Vector x(static_cast<Eigen::Index>(sorted.size()));
  for (std::size_t i = 0; i < sorted.size(); ++i) x[static_cast<Eigen::Index>(i)] = (sorted[i] - med) / input_scale;
  return x;
}

nn::Matrix window_inputs(const std::vector<std::vector<double>>& windows, std::span<const std::size_t> rows,
                         double input_scale) {
  if (rows.empty()) return nn::Matrix(0, 0);
  const auto width = static_cast<Eigen::Index>(windows.at(rows.front()).size());
  nn::Matrix m(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& w = windows.at(rows[i]);
    if (static_cast<Eigen::Index>(w.size()) != width) throw DimensionError("windows differ in length");
    m.row(static_cast<Eigen::Index>(i)) = window_input(w, input_scale).transpose();
  }
  return m;
}

double threshold_from_raw(double raw, double window_min, double window_median) {
  const double u = window_min + sigmoid(raw) * (window_median - window_min);
  return std::min(u, std::nextafter(window_median, -kInf));
}

namespace {

double threshold_for(const EstimatorNets& nets, double raw, const WindowSummary& s) {
  if (nets.threshold_mode == ThresholdMode::constant) {
    return std::min(nets.constant_threshold, std::nextafter(s.median, -kInf));
  }
  return threshold_from_raw(raw, s.min, s.median);
}

}  // namespace

double predict_threshold(const EstimatorNets& nets, std::span<const double> window) {
  check_window(nets, window);
  const WindowSummary s = summarize(window);
  if (nets.threshold_mode == ThresholdMode::constant) return threshold_for(nets, 0.0, s);
  const nn::Vector x = window_input(window, nets.input_scale);
  const double raw = nets.threshold_net.predict(x.transpose())(0, 0);
  return threshold_for(nets, raw, s);
}

GpdParams map_param_outputs(double o1, double o2, double shape_bound) {
  double xi = shape_bound * std::tanh(o1);
  if (std::abs(xi) >= shape_bound) xi = std::copysign(std::nextafter(shape_bound, 0.0), xi);
  return {xi, softplus(o2) + 1e-6};
}

GpdParams param_forward(const EstimatorNets& nets, std::span<const double> window) {
  check_window(nets, window);
  const nn::Vector x = window_input(window, nets.input_scale);
  const nn::Matrix o = nets.param_net.predict(x.transpose());
  return map_param_outputs(o(0, 0), o(0, 1), nets.shape_bound);
}

TailModel estimate(const EstimatorNets& nets, std::span<const double> window, const GmmModel* regimes) {
  TailModel m;
  m.threshold = predict_threshold(nets, window);
  m.params = param_forward(nets, window);
  m.stats.n = window.size();
  m.stats.n_u = static_cast<std::size_t>(
      std::count_if(window.begin(), window.end(), [&m](double y) { return y < m.threshold; }));
  if (regimes != nullptr) m.regime = assign_regime(*regimes, featurize(window)).label;
  return m;
}

std::optional<GpdParams> provisional_fit(std::span<const double> deficits) {
  if (deficits.size() < 2) return std::nullopt;
  if (deficits.size() >= 5) {
    try {
      return fit_gpd_moments(deficits);
    } catch (const FitError&) {
    }
  }
  const double m = stats::mean(deficits);
  if (!(m > 0.0)) return std::nullopt;
  return GpdParams{0.0, m};
}

FrozenWindow freeze_window(std::span<const double> window, double threshold, std::size_t run_gap) {
  const ExceedanceSet set = decluster_runs(extract_exceedances(window, threshold), run_gap);
  FrozenWindow f;
  f.threshold = threshold;
  f.members.reserve(set.size());
  for (const std::size_t i : set.source_indices) f.members.push_back(window[i]);
  f.provisional = provisional_fit(set.deficits);
  return f;
}

SoftCount soft_count(std::span<const double> window, double threshold, double bandwidth) {
  SoftCount c;
  for (const double y : window) {
    const double s = sigmoid((threshold - y) / bandwidth);
    c.value += s;
    c.d_threshold += s * (1.0 - s) / bandwidth;
  }
  return c;
}

double tail_penalty(double count, double n_min) {
  const double gap = std::max(0.0, n_min - count);
  return gap * gap;
}

FitTerm fit_term(std::span<const double> members, double threshold, const GpdParams& params) {
  FitTerm f;
  for (const double y : members) {
    const GpdLogDensity lp = gpd_log_pdf_soft(threshold - y, params);
    f.value -= lp.value;
    f.d_threshold -= lp.d_deficit;
  }
  return f;
}

ThresholdLoss threshold_loss(const EstimatorNets& nets, const std::vector<std::vector<double>>& windows,
                             std::span<const std::size_t> rows, const std::vector<FrozenWindow>& frozen,
                             const EstimatorConfig& cfg) {
  if (rows.empty()) throw DomainError("threshold loss needs a non-empty batch");
  if (frozen.size() != rows.size()) throw DimensionError("one frozen window per batch row");
  const nn::Matrix inputs = window_inputs(windows, rows, nets.input_scale);
  const nn::ForwardPass pass = nets.threshold_net.forward(inputs);
  const double inv_b = 1.0 / static_cast<double>(rows.size());
  nn::Matrix out_grad(static_cast<Eigen::Index>(rows.size()), 1);
  ThresholdLoss loss;
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto& w = windows[rows[b]];
    const WindowSummary s = summarize(w);
    const double raw = pass.output(static_cast<Eigen::Index>(b), 0);
    const double sig = sigmoid(raw);
    const double u = s.min + sig * (s.median - s.min);
    const double du_draw = sig * (1.0 - sig) * (s.median - s.min);

    double d_u = 0.0;
    if (frozen[b].provisional) {
      const FitTerm f = fit_term(frozen[b].members, u, *frozen[b].provisional);
      loss.fit += f.value * inv_b;
      d_u += f.d_threshold;
    }
    const SoftCount c = soft_count(w, u, cfg.bandwidth);
    const double gap = std::max(0.0, cfg.n_min - c.value);
    loss.tail += gap * gap * inv_b;
    d_u += cfg.lambda_tail * (-2.0 * gap * c.d_threshold);
    out_grad(static_cast<Eigen::Index>(b), 0) = d_u * du_draw * inv_b;
  }
  loss.value = loss.fit + cfg.lambda_tail * loss.tail;
  loss.grads = nets.threshold_net.backward(pass.tape, out_grad).flatten();
  return loss;
}

ThresholdLoss threshold_loss(const EstimatorNets& nets, const std::vector<std::vector<double>>& windows,
                             std::span<const std::size_t> rows, const EstimatorConfig& cfg) {
  std::vector<FrozenWindow> frozen;
  frozen.reserve(rows.size());
  const nn::Matrix inputs = window_inputs(windows, rows, nets.input_scale);
  const nn::Matrix raw = nets.threshold_net.predict(inputs);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto& w = windows[rows[b]];
    const WindowSummary s = summarize(w);
    const double u = s.min + sigmoid(raw(static_cast<Eigen::Index>(b), 0)) * (s.median - s.min);
    frozen.push_back(freeze_window(w, u, cfg.run_gap));
  }
  return threshold_loss(nets, windows, rows, frozen, cfg);
}

NetLoss discriminator_loss(const nn::DenseNet& discriminator, std::span<const double> real,
                           std::span<const double> fake) {
  if (real.empty() || fake.empty()) throw DomainError("discriminator loss needs real and synthetic samples");
  std::vector<double> x = log1p_all(real);
  const std::vector<double> xf = log1p_all(fake);
  x.insert(x.end(), xf.begin(), xf.end());
  const nn::ForwardPass pass = discriminator.forward(column(x));
  const auto nr = static_cast<Eigen::Index>(real.size());
  const auto nf = static_cast<Eigen::Index>(fake.size());
  std::vector<double> lr(pass.output.data(), pass.output.data() + nr);
  std::vector<double> lf(pass.output.data() + nr, pass.output.data() + nr + nf);
  const nn::LossValue a = nn::bce_with_logits(lr, 1.0);
  const nn::LossValue b = nn::bce_with_logits(lf, 0.0);
  nn::Matrix grad(nr + nf, 1);
  for (Eigen::Index i = 0; i < nr; ++i) grad(i, 0) = a.grad[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i < nf; ++i) grad(nr + i, 0) = b.grad[static_cast<std::size_t>(i)];
  return {a.value + b.value, discriminator.backward(pass.tape, grad).flatten()};
}

NetLoss generator_loss(const nn::DenseNet& param_net, const nn::DenseNet& discriminator,
                       const nn::Matrix& inputs, const std::vector<std::vector<double>>& uniforms,
                       double shape_bound) {
  if (static_cast<std::size_t>(inputs.rows()) != uniforms.size()) {
    throw DimensionError("one uniform vector per input row");
  }
  const nn::ForwardPass gp = param_net.forward(inputs);
  const auto rows = inputs.rows();
  std::vector<nn::ReparamSample> draws(uniforms.size());
  std::vector<double> z;
  for (Eigen::Index t = 0; t < rows; ++t) {
    const auto& u = uniforms[static_cast<std::size_t>(t)];
    if (u.empty()) continue;
    const GpdParams p = map_param_outputs(gp.output(t, 0), gp.output(t, 1), shape_bound);
    draws[static_cast<std::size_t>(t)] = nn::gpd_reparam_sample(p, u);
    const auto& v = draws[static_cast<std::size_t>(t)].values;
    z.insert(z.end(), v.begin(), v.end());
  }
  if (z.empty()) throw DomainError("generator loss needs at least one synthetic sample");

  const nn::ForwardPass dp = discriminator.forward(column(log1p_all(z)));
  const std::vector<double> logits(dp.output.data(), dp.output.data() + dp.output.size());
  const nn::LossValue bce = nn::bce_with_logits(logits, 1.0);
  nn::Matrix dlogit(static_cast<Eigen::Index>(logits.size()), 1);
  for (std::size_t i = 0; i < logits.size(); ++i) dlogit(static_cast<Eigen::Index>(i), 0) = bce.grad[i];
  const nn::Matrix dx = discriminator.backward(dp.tape, dlogit).input;

  nn::Matrix out_grad = nn::Matrix::Zero(rows, 2);
  std::size_t k = 0;
  for (Eigen::Index t = 0; t < rows; ++t) {
    const auto& d = draws[static_cast<std::size_t>(t)];
    double g_xi = 0.0;
    double g_beta = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i, ++k) {
      const double dz = dx(static_cast<Eigen::Index>(k), 0) / (1.0 + d.values[i]);
      g_xi += dz * d.d_shape[i];
      g_beta += dz * d.d_scale[i];
    }
    if (d.values.empty()) continue;
    const double th = std::tanh(gp.output(t, 0));
    out_grad(t, 0) = g_xi * shape_bound * (1.0 - th * th);
    out_grad(t, 1) = g_beta * sigmoid(gp.output(t, 1));
  }
  return {bce.value, param_net.backward(gp.tape, out_grad).flatten()};
}

PreparedWindows prepare_windows(const EstimatorNets& nets, const WindowDataset& dataset,
                                const EstimatorConfig& cfg) {
  PreparedWindows out;
  std::vector<std::size_t> all(dataset.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  out.inputs = window_inputs(dataset.windows, all, nets.input_scale);
  nn::Matrix raw;
  if (nets.threshold_mode == ThresholdMode::learned && !all.empty()) raw = nets.threshold_net.predict(out.inputs);
  out.thresholds.reserve(all.size());
  out.deficits.reserve(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& w = dataset.windows[i];
    const double r = raw.size() > 0 ? raw(static_cast<Eigen::Index>(i), 0) : 0.0;
    const double u = threshold_for(nets, r, summarize(w));
    out.thresholds.push_back(u);
    out.deficits.push_back(decluster_runs(extract_exceedances(w, u), cfg.run_gap).deficits);
  }
  out.regimes = dataset.regimes;
  return out;
}

AdversarialState init_adversarial_state(const EstimatorNets& nets, const EstimatorConfig& cfg) {
  return {nn::AdamState::zeros(nets.param_net.parameter_count(), {cfg.lr_generator, 0.5, 0.999, 1e-8}),
          nn::AdamState::zeros(nets.discriminator.parameter_count(), {cfg.lr_discriminator, 0.5, 0.999, 1e-8})};
}

StepResult adversarial_step(EstimatorNets& nets, AdversarialState& state, const PreparedWindows& data,
                            std::span<const std::size_t> batch, const EstimatorConfig& cfg, Rng& rng) {
  StepResult result;
  std::vector<std::vector<double>> uniforms(batch.size());
  std::vector<double> real;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& d = data.deficits.at(batch[b]);
    real.insert(real.end(), d.begin(), d.end());
    uniforms[b].resize(d.size());
    for (double& u : uniforms[b]) u = rng.uniform_open();
  }
  if (real.empty()) {
    result.skipped = true;
    return result;
  }
  const nn::Matrix inputs = select_rows(data.inputs, batch);

  const nn::Matrix raw = nets.param_net.predict(inputs);
  std::vector<double> fake;
  fake.reserve(real.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (uniforms[b].empty()) continue;
    const auto row = static_cast<Eigen::Index>(b);
    const GpdParams p = map_param_outputs(raw(row, 0), raw(row, 1), nets.shape_bound);
    const auto s = nn::gpd_reparam_sample(p, uniforms[b]);
    fake.insert(fake.end(), s.values.begin(), s.values.end());
  }

  const NetLoss ld = discriminator_loss(nets.discriminator, real, fake);
  nn::apply_update(nets.discriminator, state.discriminator, ld.grads, cfg.max_grad_norm);
  const NetLoss lg = generator_loss(nets.param_net, nets.discriminator, inputs, uniforms, nets.shape_bound);
  nn::apply_update(nets.param_net, state.generator, lg.grads, cfg.max_grad_norm);
  result.loss_d = ld.value;
  result.loss_g = lg.value;
  return result;
}

std::vector<std::vector<std::size_t>> stratified_batches(std::span<const std::size_t> indices,
                                                         std::span<const std::size_t> regimes,
                                                         std::size_t batch_size, Rng& rng) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (const std::size_t i : indices) groups[regimes[i]].push_back(i);
  std::vector<std::vector<std::vector<std::size_t>>> chunks;
  for (auto& [label, members] : groups) {
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.index(i)]);
    std::vector<std::vector<std::size_t>> c;
    for (std::size_t s = 0; s < members.size(); s += batch_size) {
      c.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(s),
                     members.begin() + static_cast<std::ptrdiff_t>(std::min(s + batch_size, members.size())));
    }
    chunks.push_back(std::move(c));
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (auto& c : chunks) {
      if (round < c.size()) {
        out.push_back(std::move(c[round]));
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

ThresholdHistory train_threshold_net(EstimatorNets& nets, const WindowDataset& dataset,
                                     const EstimatorConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (dataset.size() < 100) throw FitError("threshold training needs at least 100 windows", dataset.size());
  if (nets.threshold_mode != ThresholdMode::learned) throw ConfigError("threshold net is not in learned mode");
  const auto [train, val] = split_validation(dataset.size(), cfg.validation_every);
  nn::AdamState adam = nn::AdamState::zeros(nets.threshold_net.parameter_count(), {cfg.lr_threshold, 0.9, 0.999, 1e-8});
  Rng rng(derive_seed(seed, "threshold_training"));

  ThresholdHistory history;
  nn::Vector best_params = nets.threshold_net.parameters();
  double best = kInf;
  double plateau_ref = kInf;
  std::size_t since_best = 0;
  std::size_t since_plateau = 0;
  for (std::size_t epoch = 0; epoch < cfg.threshold_epochs; ++epoch) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& batch : stratified_batches(train, dataset.regimes, cfg.batch_size, rng)) {
      const ThresholdLoss loss = threshold_loss(nets, dataset.windows, batch, cfg);
      if (!std::isfinite(loss.value) || !loss.grads.allFinite()) {
        throw NumericalError("threshold loss became non-finite at epoch " + std::to_string(epoch));
      }
      nn::apply_update(nets.threshold_net, adam, loss.grads, cfg.max_grad_norm);
      total += loss.value * static_cast<double>(batch.size());
      count += batch.size();
    }
    const double val_loss = threshold_loss(nets, dataset.windows, val, cfg).value;
    if (!std::isfinite(val_loss)) {
      throw NumericalError("threshold validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    history.epochs.push_back({epoch, total / static_cast<double>(std::max<std::size_t>(count, 1)), val_loss,
                              adam.config.learning_rate});
    if (val_loss < best) {
      best = val_loss;
      best_params = nets.threshold_net.parameters();
      history.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (val_loss < plateau_ref - 0.01 * std::abs(plateau_ref)) {
      plateau_ref = val_loss;
      since_plateau = 0;
    } else if (++since_plateau >= cfg.plateau_patience) {
      adam.config.learning_rate *= 0.5;
      since_plateau = 0;
    }
    if (since_best >= cfg.patience) break;
  }
  nets.threshold_net.set_parameters(best_params);
  return history;
}

void use_constant_threshold(EstimatorNets& nets, const WindowDataset& dataset, const EstimatorConfig& cfg) {
  std::vector<double> pooled;
  for (const auto& w : dataset.windows) pooled.insert(pooled.end(), w.begin(), w.end());
  if (pooled.empty()) throw FitError("constant threshold needs training windows", 0);
  nets.threshold_mode = ThresholdMode::constant;
  nets.constant_threshold = stats::quantile(pooled, cfg.n_min / static_cast<double>(cfg.window));
}

double validation_ks(const EstimatorNets& nets, const PreparedWindows& data, std::span<const std::size_t> rows) {
  if (rows.empty()) return 1.0;
  const nn::Matrix raw = nets.param_net.predict(select_rows(data.inputs, rows));
  struct Group {
    std::vector<double> deficits;
    std::vector<GpdParams> params;
    std::vector<double> weights;
  };
  std::map<std::size_t, Group> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& d = data.deficits[rows[i]];
    if (d.empty()) continue;
    auto& g = groups[data.regimes[rows[i]]];
    g.deficits.insert(g.deficits.end(), d.begin(), d.end());
    const auto r = static_cast<Eigen::Index>(i);
    g.params.push_back(map_param_outputs(raw(r, 0), raw(r, 1), nets.shape_bound));
    g.weights.push_back(static_cast<double>(d.size()));
  }
  if (groups.empty()) return 1.0;
  double ks = 0.0;
  double n = 0.0;
  for (auto& [label, g] : groups) {
    const auto model = TailDistribution::mixture(g.params, g.weights);
    const double w = static_cast<double>(g.deficits.size());
    ks += w * ks_statistic(g.deficits, model);
    n += w;
  }
  return ks / n;
}

AdversarialHistory train_estimator(EstimatorNets& nets, const WindowDataset& dataset,
                                   const EstimatorConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const PreparedWindows data = prepare_windows(nets, dataset, cfg);
  const auto [train, val] = split_validation(dataset.size(), cfg.validation_every);
  AdversarialState state = init_adversarial_state(nets, cfg);
  Rng rng(derive_seed(seed, "adversarial_training"));

  AdversarialHistory history;
  nn::Vector best_g = nets.param_net.parameters();
  nn::Vector best_d = nets.discriminator.parameters();
  double best = kInf;
  std::size_t since_best = 0;
  std::size_t high_streak = 0;
  for (std::size_t epoch = 0; epoch < cfg.adversarial_epochs; ++epoch) {
    double sum_d = 0.0;
    double sum_g = 0.0;
    std::size_t steps = 0;
    for (const auto& batch : stratified_batches(train, dataset.regimes, cfg.batch_size, rng)) {
      const StepResult r = adversarial_step(nets, state, data, batch, cfg, rng);
      if (r.skipped) continue;
      if (!std::isfinite(r.loss_d) || !std::isfinite(r.loss_g)) {
        throw NumericalError("adversarial loss became non-finite at epoch " + std::to_string(epoch));
      }
      sum_d += r.loss_d;
      sum_g += r.loss_g;
      ++steps;
    }
    if (steps == 0) throw FitError("no training window has exceedances", dataset.size());
    AdversarialEpoch e{epoch, sum_d / static_cast<double>(steps), sum_g / static_cast<double>(steps),
                       validation_ks(nets, data, val)};
    history.epochs.push_back(e);
    if (e.validation_ks < best) {
      best = e.validation_ks;
      best_g = nets.param_net.parameters();
      best_d = nets.discriminator.parameters();
      history.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    high_streak = e.loss_g > 10.0 * kLn2 ? high_streak + 1 : 0;
    if (high_streak >= 3) {
      history.diverged = true;
      break;
    }
    if (since_best >= cfg.patience) break;
  }
  nets.param_net.set_parameters(best_g);
  nets.discriminator.set_parameters(best_d);
  return history;
}

NetLoss kl_loss(const nn::DenseNet& param_net, const nn::Matrix& inputs,
                const std::vector<std::vector<double>>& deficits, double shape_bound) {
  if (static_cast<std::size_t>(inputs.rows()) != deficits.size()) {
    throw DimensionError("one deficit vector per input row");
  }
  const nn::ForwardPass pass = param_net.forward(inputs);
  std::size_t used = 0;
  for (const auto& d : deficits) used += d.empty() ? 0 : 1;
  nn::Matrix out_grad = nn::Matrix::Zero(inputs.rows(), 2);
  NetLoss loss;
  if (used == 0) {
    loss.grads = nn::Vector::Zero(static_cast<Eigen::Index>(param_net.parameter_count()));
    return loss;
  }
  const double inv_w = 1.0 / static_cast<double>(used);
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    const auto& d = deficits[static_cast<std::size_t>(t)];
    if (d.empty()) continue;
    const GpdParams p = map_param_outputs(pass.output(t, 0), pass.output(t, 1), shape_bound);
    const double inv_n = 1.0 / static_cast<double>(d.size());
    double g_xi = 0.0;
    double g_beta = 0.0;
    for (const double z : d) {
      const GpdLogDensity lp = gpd_log_pdf_soft(z, p);
      loss.value -= lp.value * inv_n * inv_w;
      g_xi -= lp.d_shape * inv_n * inv_w;
      g_beta -= lp.d_scale * inv_n * inv_w;
    }
    const double th = std::tanh(pass.output(t, 0));
    out_grad(t, 0) = g_xi * shape_bound * (1.0 - th * th);
    out_grad(t, 1) = g_beta * sigmoid(pass.output(t, 1));
  }
  loss.grads = param_net.backward(pass.tape, out_grad).flatten();
  return loss;
}

KlHistory train_param_net_kl(EstimatorNets& nets, const WindowDataset& dataset, const EstimatorConfig& cfg,
                             std::uint64_t seed) {
  validate(cfg);
  const PreparedWindows data = prepare_windows(nets, dataset, cfg);
  const auto [train, val] = split_validation(dataset.size(), cfg.validation_every);
  nn::AdamState adam = nn::AdamState::zeros(nets.param_net.parameter_count(), {cfg.lr_generator, 0.9, 0.999, 1e-8});
  Rng rng(derive_seed(seed, "kl_training"));

  KlHistory history;
  nn::Vector best_params = nets.param_net.parameters();
  double best = kInf;
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < cfg.adversarial_epochs; ++epoch) {
    double total = 0.0;
    std::size_t steps = 0;
    for (const auto& batch : stratified_batches(train, dataset.regimes, cfg.batch_size, rng)) {
      std::vector<std::vector<double>> deficits;
      bool any = false;
      for (const std::size_t i : batch) {
        deficits.push_back(data.deficits[i]);
        any = any || !data.deficits[i].empty();
      }
      if (!any) continue;
      const NetLoss loss = kl_loss(nets.param_net, select_rows(data.inputs, batch), deficits, nets.shape_bound);
      if (!std::isfinite(loss.value)) {
        throw NumericalError("likelihood loss became non-finite at epoch " + std::to_string(epoch));
      }
      nn::apply_update(nets.param_net, adam, loss.grads, cfg.max_grad_norm);
      total += loss.value;
      ++steps;
    }
    if (steps == 0) throw FitError("no training window has exceedances", dataset.size());
    KlEpoch e{epoch, total / static_cast<double>(steps), validation_ks(nets, data, val)};
    history.epochs.push_back(e);
    if (e.validation_ks < best) {
      best = e.validation_ks;
      best_params = nets.param_net.parameters();
      history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  nets.param_net.set_parameters(best_params);
  return history;
}

nlohmann::json to_json(const Checkpoint& c) {
  return {{"format", "tailgan.checkpoint"},
          {"version", 1},
          {"objective", c.objective},
          {"config", to_json(c.config)},
          {"input_scale", c.nets.input_scale},
          {"shape_bound", c.nets.shape_bound},
          {"threshold_mode", to_string(c.nets.threshold_mode)},
          {"constant_threshold", c.nets.constant_threshold},
          {"threshold_net", nn::to_json(c.nets.threshold_net)},
          {"param_net", nn::to_json(c.nets.param_net)},
          {"discriminator", nn::to_json(c.nets.discriminator)},
          {"regimes", c.regimes ? to_json(*c.regimes) : nlohmann::json()}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "tailgan.checkpoint" || doc.at("version").get<int>() != 1) {
      throw ConfigError("not a version-1 checkpoint");
    }
    Checkpoint c;
    c.objective = doc.at("objective").get<std::string>();
    c.config = estimator_config_from_json(doc.at("config"));
    c.nets.input_scale = doc.at("input_scale").get<double>();
    c.nets.shape_bound = doc.at("shape_bound").get<double>();
    c.nets.threshold_mode = threshold_mode_from_string(doc.at("threshold_mode").get<std::string>());
    c.nets.constant_threshold = doc.at("constant_threshold").get<double>();
    c.nets.threshold_net = nn::dense_net_from_json(doc.at("threshold_net"));
    c.nets.param_net = nn::dense_net_from_json(doc.at("param_net"));
    c.nets.discriminator = nn::dense_net_from_json(doc.at("discriminator"));
    if (!doc.at("regimes").is_null()) c.regimes = gmm_from_json(doc.at("regimes"));
    if (c.nets.param_net.input_dim() != c.config.window || c.nets.threshold_net.input_dim() != c.config.window) {
      throw ConfigError("checkpoint nets do not match the configured window");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace tailgan
