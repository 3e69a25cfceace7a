#include "tailgan/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "tailgan/augmentor.hpp"
#include "tailgan/csv.hpp"
#include "tailgan/errors.hpp"
#include "tailgan/pipeline.hpp"
#include "tailgan/synth.hpp"

namespace tailgan::cli {

using nlohmann::json;

json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string message = e.what();
    if (const auto at = message.find(": ", message.find("column")); at != std::string::npos) {
      message = message.substr(at + 2);
    }
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message);
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path);
  return parse_json_text(buffer.str(), path);
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

namespace {

class Logger {
 public:
  Logger(std::ostream& os, int level) : os_(os), level_(level) {}
  void info(const std::string& msg) const {
    if (level_ >= 1) os_ << "[info] " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ >= 2) os_ << "[debug] " << msg << '\n';
  }
  void warn(const std::string& msg) const {
    if (level_ >= 0) os_ << "[warn] " << msg << '\n';
  }

 private:
  std::ostream& os_;
  int level_;
};

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::optional<std::size_t> window;
  std::optional<std::size_t> stride;
  std::optional<double> xth;
  std::optional<std::string> ablation;
  std::optional<int> verbosity;
};

const std::vector<std::string> kCommonKeys = {"command", "seed", "out", "verbosity"};

const std::map<std::string, std::vector<std::string>> kCommandKeys = {
    {"synth", {"synth"}},
    {"augment", {"data", "window", "regimes", "augment", "vanilla"}},
    {"train", {"data", "split", "regimes", "estimator", "objective", "ablation"}},
    {"estimate", {"data", "checkpoint", "window", "stride", "xth"}},
    {"evaluate",
     {"data", "split", "regimes", "window", "models", "mle_level", "target_per_regime", "run_gap", "augment"}},
};

const std::vector<std::string> kModelNames = {"evt-gan", "mlp-kl", "mle", "vanilla-gan-augment"};

bool contains(const std::vector<std::string>& keys, const std::string& key) {
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

bool known_key(const std::string& key) {
  if (contains(kCommonKeys, key)) return true;
  for (const auto& [_, keys] : kCommandKeys) {
    if (contains(keys, key)) return true;
  }
  return false;
}

// Defaults, then the config file, then flags. Keys of other commands are
// accepted in the file and dropped.
json raw_config(const std::string& command, const Flags& flags) {
  json doc = json::object();
  if (flags.config) {
    const json file = read_json_file(*flags.config);
    if (!file.is_object()) throw ConfigError(*flags.config + ": top level must be a JSON object");
    for (const auto& item : file.items()) {
      if (!known_key(item.key())) throw ConfigError(*flags.config + ": unknown key '" + item.key() + "'");
      if (item.key() == "command") continue;
      if (contains(kCommonKeys, item.key()) || contains(kCommandKeys.at(command), item.key())) {
        doc[item.key()] = item.value();
      }
    }
  }
  const auto& keys = kCommandKeys.at(command);
  const auto reject = [&](bool given, const std::string& flag, const std::string& key) {
    if (given && !contains(keys, key)) throw ConfigError("--" + flag + " does not apply to '" + command + "'");
  };
  reject(flags.data.has_value(), "data", "data");
  reject(flags.checkpoint.has_value() && command != "evaluate", "checkpoint", "checkpoint");
  reject(flags.window.has_value() && command != "train", "window", "window");
  reject(flags.stride.has_value(), "stride", "stride");
  reject(flags.xth.has_value() && command != "train", "xth", "xth");
  reject(flags.ablation.has_value(), "ablation", "ablation");

  if (flags.seed) doc["seed"] = *flags.seed;
  if (flags.out) doc["out"] = *flags.out;
  if (flags.verbosity) doc["verbosity"] = *flags.verbosity;
  if (flags.data) doc["data"] = *flags.data;
  if (flags.stride) doc["stride"] = *flags.stride;
  if (flags.ablation) doc["ablation"] = *flags.ablation;
  if (command == "train") {
    if (flags.window) doc["estimator"]["window"] = *flags.window;
    if (flags.xth) doc["estimator"]["outage_threshold"] = *flags.xth;
  } else {
    if (flags.window) doc["window"] = *flags.window;
    if (flags.xth) doc["xth"] = *flags.xth;
  }
  if (flags.checkpoint) {
    if (command == "evaluate") {
      doc["models"]["evt-gan"] = *flags.checkpoint;
    } else {
      doc["checkpoint"] = *flags.checkpoint;
    }
  }
  return doc;
}

template <typename T>
T get_or(const json& doc, const std::string& key, T fallback) {
  const auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  return it->get<T>();
}

std::string require_string(const json& doc, const std::string& key, const std::string& command) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) throw ConfigError("'" + command + "' needs '" + key + "'");
  return it->get<std::string>();
}

struct Common {
  std::uint64_t seed = 1;
  std::string out = "out";
  int verbosity = 1;
};

Common read_common(const json& doc) {
  Common c;
  c.seed = get_or<std::uint64_t>(doc, "seed", c.seed);
  c.out = get_or<std::string>(doc, "out", c.out);
  c.verbosity = get_or<int>(doc, "verbosity", c.verbosity);
  if (c.out.empty()) throw ConfigError("'out' must not be empty");
  if (c.verbosity < 0 || c.verbosity > 2) throw ConfigError("verbosity must be 0, 1 or 2");
  return c;
}

json common_json(const std::string& command, const Common& c) {
  return {{"command", command}, {"seed", c.seed}, {"out", c.out}, {"verbosity", c.verbosity}};
}

std::filesystem::path prepare_out(const Common& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) throw IoError("cannot create output directory " + c.out + ": " + ec.message());
  return c.out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------- synth

int cmd_synth(const json& raw, std::ostream& log) {
  const Common common = read_common(raw);
  SynthConfig cfg = raw.contains("synth") ? synth_config_from_json(raw.at("synth")) : SynthConfig{};
  cfg.seed = derive_seed(common.seed, "synth");
  validate(cfg);
  json resolved = common_json("synth", common);
  resolved["synth"] = to_json(cfg);

  const Logger logger(log, common.verbosity);
  const auto dir = prepare_out(common);
  write_json_file((dir / "resolved_config.json").string(), resolved);
  const SyntheticStream stream = generate_synthetic(cfg);
  write_csv((dir / "data.csv").string(), stream.series, {}, stream.regime_labels);
  write_json_file((dir / "ground_truth.json").string(), stream.ground_truth());
  logger.info("synth: " + std::to_string(stream.series.size()) + " samples in " +
              std::to_string(stream.segments.size()) + " segments -> " + dir.string());
  return kSuccess;
}

// -------------------------------------------------------------- augment

int cmd_augment(const json& raw, std::ostream& log) {
  const Common common = read_common(raw);
  const std::string data_path = require_string(raw, "data", "augment");
  const std::size_t window = get_or<std::size_t>(raw, "window", 100);
  if (window < kMinFeatureWindow) throw ConfigError("window must be at least 20");
  const RegimeConfig regimes = raw.contains("regimes") ? regime_config_from_json(raw.at("regimes")) : RegimeConfig{};
  const AugmentConfig cfg = raw.contains("augment") ? augment_config_from_json(raw.at("augment")) : AugmentConfig{};
  validate(cfg);
  const bool vanilla = get_or<bool>(raw, "vanilla", false);

  json resolved = common_json("augment", common);
  resolved["data"] = data_path;
  resolved["window"] = window;
  resolved["regimes"] = to_json(regimes);
  resolved["augment"] = to_json(cfg);
  resolved["vanilla"] = vanilla;

  const Logger logger(log, common.verbosity);
  const auto dir = prepare_out(common);
  write_json_file((dir / "resolved_config.json").string(), resolved);

  const CsvTable table = read_csv(data_path);
  const auto values = table.series.values();
  std::vector<std::size_t> labels;
  if (cfg.per_regime) {
    if (!table.regime_labels.empty()) {
      labels = table.regime_labels;
      logger.info("augment: using the regime column of " + data_path);
    } else if (regimes.enabled) {
      const IndexRange all{0, values.size()};
      const GmmModel model =
          fit_regime_model(values, std::span<const IndexRange>(&all, 1), window, regimes, derive_seed(common.seed, "data"));
      labels = label_samples(values, window, model);
      logger.info("augment: " + std::to_string(model.components) + " regimes selected by BIC");
    }
  }
  const AugmentorResult result = train_augmentor(values, labels, cfg, derive_seed(common.seed, "augment"));
  for (const auto& w : result.warnings) logger.warn(w);
  if (result.generators.empty()) throw FitError("no regime has enough samples for augmentation", values.size());

  Rng rng(derive_seed(common.seed, "augment-sample"));
  const AugmentedDataset augmented = build_augmented_dataset(values, labels, result, cfg.ratio, rng);
  write_csv((dir / "augmented.csv").string(), SampleSeries(augmented.values, table.series.sample_period()),
            augmented.origins,
            labels.empty() ? std::nullopt : std::optional<std::vector<std::size_t>>(augmented.regimes));
  write_json_file((dir / "augmentor.json").string(), to_json(result));

  std::ostringstream history;
  history << "generator,regime,epoch,loss_d,loss_g\n";
  for (const auto& g : result.generators) {
    for (const auto& e : g.history) {
      history << "hybrid," << g.regime << ',' << e.epoch << ',' << format_double(e.loss_d) << ','
              << format_double(e.loss_g) << '\n';
    }
  }
  if (vanilla) {
    const VanillaResult v = train_vanilla_gan(values, cfg, derive_seed(common.seed, "vanilla"));
    write_json_file((dir / "vanilla.json").string(), to_json(v.generator));
    for (const auto& e : v.history) {
      history << "vanilla,," << e.epoch << ',' << format_double(e.loss_d) << ',' << format_double(e.loss_g) << '\n';
    }
  }
  write_text(dir / "augment_history.csv", history.str());
  logger.info("augment: " + std::to_string(result.generators.size()) + " generators, " +
              std::to_string(augmented.values.size()) + " samples -> " + dir.string());
  return kSuccess;
}

// ---------------------------------------------------------------- train

std::string history_csv(const TrainOutcome& outcome, const std::string& ablation) {
  std::ostringstream os;
  os << "stage,epoch,loss,loss_d,loss_g,validation,learning_rate,ablation\n";
  for (const auto& e : outcome.threshold.epochs) {
    os << "threshold," << e.epoch << ',' << format_double(e.train_loss) << ",,," << format_double(e.validation_loss)
       << ',' << format_double(e.learning_rate) << ',' << ablation << '\n';
  }
  for (const auto& e : outcome.adversarial.epochs) {
    os << "adversarial," << e.epoch << ",," << format_double(e.loss_d) << ',' << format_double(e.loss_g) << ','
       << format_double(e.validation_ks) << ",," << ablation << '\n';
  }
  for (const auto& e : outcome.kl.epochs) {
    os << "kl," << e.epoch << ',' << format_double(e.loss) << ",,," << format_double(e.validation_ks) << ",,"
       << ablation << '\n';
  }
  return os.str();
}

int cmd_train(const json& raw, std::ostream& log) {
  const Common common = read_common(raw);
  const std::string data_path = require_string(raw, "data", "train");
  const SplitConfig split = raw.contains("split") ? split_config_from_json(raw.at("split")) : SplitConfig{};
  const RegimeConfig regimes = raw.contains("regimes") ? regime_config_from_json(raw.at("regimes")) : RegimeConfig{};
  EstimatorConfig cfg = raw.contains("estimator") ? estimator_config_from_json(raw.at("estimator")) : EstimatorConfig{};
  const std::string objective = get_or<std::string>(raw, "objective", "adversarial");
  const std::string ablation = get_or<std::string>(raw, "ablation", "none");
  if (objective != "adversarial" && objective != "kl") throw ConfigError("objective must be 'adversarial' or 'kl'");
  if (ablation != "none" && ablation != "constant-threshold") {
    throw ConfigError("ablation must be 'none' or 'constant-threshold'");
  }
  cfg.threshold_mode = ablation == "constant-threshold" ? ThresholdMode::constant : ThresholdMode::learned;
  validate(cfg);

  json resolved = common_json("train", common);
  resolved["data"] = data_path;
  resolved["split"] = to_json(split);
  resolved["regimes"] = to_json(regimes);
  resolved["estimator"] = to_json(cfg);
  resolved["objective"] = objective;
  resolved["ablation"] = ablation;

  const Logger logger(log, common.verbosity);
  const auto dir = prepare_out(common);
  write_json_file((dir / "resolved_config.json").string(), resolved);

  const SampleSeries series = ingest_csv(data_path);
  const TrainingData data =
      prepare_training_data(series.values(), split, regimes, cfg.window, derive_seed(common.seed, "data"));
  logger.info("train: " + std::to_string(data.train.size()) + " training windows, " +
              std::to_string(data.eval.size()) + " evaluation windows, " +
              std::to_string(data.regimes ? data.regimes->components : 1) + " regimes");
  const auto started = std::chrono::steady_clock::now();
  const TrainOutcome outcome =
      train_model(data, cfg, objective, ablation == "constant-threshold", derive_seed(common.seed, "train"));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_text(dir / "history.csv", history_csv(outcome, ablation));
  if (outcome.adversarial.diverged) {
    throw NumericalError("adversarial training diverged; history written to " + (dir / "history.csv").string());
  }
  write_json_file((dir / "checkpoint.json").string(), to_json(outcome.checkpoint));
  logger.info("train: done in " + std::to_string(seconds) + " s -> " + dir.string());
  return kSuccess;
}

// ------------------------------------------------------------- estimate

std::string estimate_row(std::size_t start, const std::vector<double>& window, const TailModel& m,
                         const std::optional<double>& xth) {
  std::ostringstream os;
  os << start << ',' << start + window.size() << ',' << format_double(m.threshold) << ','
     << format_double(m.params.shape) << ',' << format_double(m.params.scale) << ',' << m.stats.n << ','
     << m.stats.n_u << ',';
  if (m.regime) os << *m.regime;
  if (xth) {
    double p = 0.0;
    if (*xth < m.threshold) {
      p = tail_probability(m, *xth);
    } else {
      std::size_t below = 0;
      for (const double y : window) below += y < *xth ? 1 : 0;
      p = static_cast<double>(below) / static_cast<double>(window.size());
    }
    os << ',' << format_double(p);
  }
  os << '\n';
  return os.str();
}

int cmd_estimate(const json& raw, std::ostream& log) {
  const Common common = read_common(raw);
  const std::string data_path = require_string(raw, "data", "estimate");
  const std::string checkpoint_path = require_string(raw, "checkpoint", "estimate");
  const std::size_t stride = get_or<std::size_t>(raw, "stride", 1);
  if (stride == 0) throw ConfigError("stride must be positive");
  std::optional<double> xth;
  if (raw.contains("xth") && !raw.at("xth").is_null()) {
    xth = raw.at("xth").get<double>();
    if (!std::isfinite(*xth)) throw ConfigError("xth must be finite");
  }

  const Checkpoint checkpoint = checkpoint_from_json(read_json_file(checkpoint_path));
  const std::size_t trained_window = checkpoint.config.window;
  const std::size_t window = get_or<std::size_t>(raw, "window", trained_window);
  if (window != trained_window) {
    throw ConfigError("window " + std::to_string(window) + " does not match the checkpoint window " +
                      std::to_string(trained_window));
  }

  json resolved = common_json("estimate", common);
  resolved["data"] = data_path;
  resolved["checkpoint"] = checkpoint_path;
  resolved["window"] = window;
  resolved["stride"] = stride;
  resolved["xth"] = xth ? json(*xth) : json(nullptr);

  const Logger logger(log, common.verbosity);
  const auto dir = prepare_out(common);
  write_json_file((dir / "resolved_config.json").string(), resolved);

  const auto out_path = dir / "estimates.csv";
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + out_path.string());
  out << "start,end,threshold,shape,scale,n,n_u,regime";
  if (xth) out << ",tail_probability";
  out << '\n';

  CsvStreamReader reader(data_path);
  const GmmModel* regimes = checkpoint.regimes ? &*checkpoint.regimes : nullptr;
  std::vector<double> ring(window);
  std::vector<double> current(window);
  std::size_t seen = 0;
  std::size_t records = 0;
  const auto started = std::chrono::steady_clock::now();
  while (const auto value = reader.next()) {
    ring[seen % window] = *value;
    ++seen;
    if (seen < window || (seen - window) % stride != 0) continue;
    const std::size_t start = seen - window;
    for (std::size_t i = 0; i < window; ++i) current[i] = ring[(start + i) % window];
    out << estimate_row(start, current, estimate(checkpoint.nets, current, regimes), xth);
    ++records;
  }
  out.flush();
  if (!out) throw IoError("write failed: " + out_path.string());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (seen < window) {
    logger.warn("estimate: stream has " + std::to_string(seen) + " samples, shorter than one window of " +
                std::to_string(window) + "; no estimates");
  }
  std::ostringstream msg;
  msg << "estimate: " << records << " windows from " << seen << " samples in " << seconds << " s";
  if (seconds > 0.0 && records > 0) msg << " (" << static_cast<double>(records) / seconds << " windows/s)";
  logger.info(msg.str());
  return kSuccess;
}

// ------------------------------------------------------------- evaluate

struct ModelRow {
  std::string name;
  ModelEvaluation evaluation;
  std::vector<QqPoints> qq;
};

int cmd_evaluate(const json& raw, std::ostream& log) {
  const Common common = read_common(raw);
  const std::string data_path = require_string(raw, "data", "evaluate");
  const SplitConfig split = raw.contains("split") ? split_config_from_json(raw.at("split")) : SplitConfig{};
  const RegimeConfig regimes = raw.contains("regimes") ? regime_config_from_json(raw.at("regimes")) : RegimeConfig{};
  const std::size_t window = get_or<std::size_t>(raw, "window", 100);
  const double mle_level = get_or<double>(raw, "mle_level", 0.1);
  const std::size_t target = get_or<std::size_t>(raw, "target_per_regime", 0);
  const std::size_t run_gap = get_or<std::size_t>(raw, "run_gap", 0);
  const AugmentConfig augment = raw.contains("augment") ? augment_config_from_json(raw.at("augment")) : AugmentConfig{};
  validate(augment);
  if (window < kMinFeatureWindow) throw ConfigError("window must be at least 20");
  if (!(mle_level > 0.0 && mle_level < 1.0)) throw ConfigError("mle_level must lie in (0, 1)");

  json models = json::object();
  const json given = raw.contains("models") ? raw.at("models") : json::object();
  if (!given.is_object()) throw ConfigError("'models' must be a JSON object");
  for (const auto& item : given.items()) {
    if (!contains(kModelNames, item.key())) throw ConfigError("unknown model '" + item.key() + "'");
  }
  for (const auto& name : kModelNames) {
    const json fallback = (name == "mle" || name == "vanilla-gan-augment") && !given.contains(name) ? json(true) : json(nullptr);
    const json v = given.contains(name) ? given.at(name) : fallback;
    if (name == "evt-gan" || name == "mlp-kl") {
      if (!v.is_null() && !v.is_string()) throw ConfigError("model '" + name + "' takes a checkpoint path");
    } else if (!v.is_null() && !v.is_boolean()) {
      throw ConfigError("model '" + name + "' takes true or false");
    }
    models[name] = v;
  }

  json resolved = common_json("evaluate", common);
  resolved["data"] = data_path;
  resolved["split"] = to_json(split);
  resolved["regimes"] = to_json(regimes);
  resolved["window"] = window;
  resolved["models"] = models;
  resolved["mle_level"] = mle_level;
  resolved["target_per_regime"] = target;
  resolved["run_gap"] = run_gap;
  resolved["augment"] = to_json(augment);

  const Logger logger(log, common.verbosity);
  const auto dir = prepare_out(common);
  write_json_file((dir / "resolved_config.json").string(), resolved);

  std::map<std::string, Checkpoint> checkpoints;
  for (const std::string name : {"evt-gan", "mlp-kl"}) {
    if (!models[name].is_string()) continue;
    Checkpoint c = checkpoint_from_json(read_json_file(models[name].get<std::string>()));
    if (c.config.window != window) {
      throw ConfigError("checkpoint of '" + name + "' uses window " + std::to_string(c.config.window) +
                        ", evaluation uses " + std::to_string(window));
    }
    checkpoints.emplace(name, std::move(c));
  }

  const SampleSeries series = ingest_csv(data_path);
  std::optional<GmmModel> shared;
  for (const auto& [_, c] : checkpoints) {
    if (c.regimes) {
      shared = c.regimes;
      break;
    }
  }
  RegimeConfig data_regimes = regimes;
  if (shared) data_regimes.enabled = false;
  TrainingData data =
      prepare_training_data(series.values(), split, data_regimes, window, derive_seed(common.seed, "data"));
  if (shared) {
    data.regimes = shared;
    assign_regimes(data.train, *shared);
    assign_regimes(data.eval, *shared);
    assign_regimes(data.train_disjoint, *shared);
  }

  std::vector<ModelRow> rows;
  for (const std::string name : {"evt-gan", "mlp-kl"}) {
    const auto it = checkpoints.find(name);
    if (it == checkpoints.end()) {
      logger.warn("model '" + name + "' has no checkpoint configured; row omitted");
      continue;
    }
    ModelRow row{name, {}, {}};
    row.evaluation = evaluate_estimator(it->second.nets, data.eval, run_gap, name, target, &row.qq);
    rows.push_back(std::move(row));
  }
  std::map<std::size_t, RegimeTail> mle_tails;
  const bool want_mle = models["mle"] == true;
  const bool want_vanilla = models["vanilla-gan-augment"] == true;
  if (want_mle || want_vanilla) mle_tails = fit_mle_per_regime(data.train_disjoint, mle_level, run_gap);
  if (want_mle) {
    ModelRow row{"mle", {}, {}};
    row.evaluation = evaluate_fixed(mle_tails, data.eval, run_gap, "mle", target, &row.qq);
    rows.push_back(std::move(row));
  } else {
    logger.warn("model 'mle' is not enabled; row omitted");
  }
  if (want_vanilla) {
    std::vector<std::string> warnings;
    const auto tails =
        fit_vanilla_per_regime(data.train_disjoint, mle_tails, augment, derive_seed(common.seed, "vanilla"), warnings);
    for (const auto& w : warnings) logger.warn(w);
    if (tails.empty()) {
      logger.warn("model 'vanilla-gan-augment' produced no regime tail; row omitted");
    } else {
      ModelRow row{"vanilla-gan-augment", {}, {}};
      row.evaluation = evaluate_fixed(tails, data.eval, run_gap, row.name, target, &row.qq);
      rows.push_back(std::move(row));
    }
  } else {
    logger.warn("model 'vanilla-gan-augment' is not enabled; row omitted");
  }

  std::ostringstream table;
  table << kReportCsvHeader << '\n';
  for (const auto& row : rows) {
    write_json_file((dir / ("report_" + row.name + ".json")).string(), to_json(row.evaluation));
    table << to_csv_row(row.evaluation.aggregate) << '\n';
    for (std::size_t g = 0; g < row.evaluation.groups.size(); ++g) {
      const auto& group = row.evaluation.groups[g];
      table << to_csv_row(group) << '\n';
      std::string scope = group.scope;
      std::replace(scope.begin(), scope.end(), ':', '_');
      write_text(dir / ("qq_" + row.name + "_" + scope + ".csv"), qq_to_csv(row.qq[g]));
    }
    std::ostringstream msg;
    msg << "evaluate: " << row.name << " N=" << row.evaluation.aggregate.n << " KS=" << row.evaluation.aggregate.ks
        << " PPCC=" << row.evaluation.aggregate.ppcc;
    logger.info(msg.str());
  }
  write_text(dir / "comparison.csv", table.str());
  return kSuccess;
}

int dispatch(const std::string& command, const Flags& flags, std::ostream& log) {
  const json raw = raw_config(command, flags);
  try {
    if (command == "synth") return cmd_synth(raw, log);
    if (command == "augment") return cmd_augment(raw, log);
    if (command == "train") return cmd_train(raw, log);
    if (command == "estimate") return cmd_estimate(raw, log);
    return cmd_evaluate(raw, log);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log) {
  CLI::App app{"Lower-tail modeling of received-power streams", "tailgan"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  Flags flags;
  std::string config, out_dir, data, checkpoint, ablation;
  std::uint64_t seed = 0;
  std::size_t window = 0, stride = 0;
  double xth = 0.0;
  auto* o_config = app.add_option("--config", config, "JSON config file");
  auto* o_seed = app.add_option("--seed", seed, "root seed");
  auto* o_out = app.add_option("--out", out_dir, "output directory");
  auto* o_data = app.add_option("--data", data, "input CSV");
  auto* o_checkpoint = app.add_option("--checkpoint", checkpoint, "checkpoint JSON");
  auto* o_window = app.add_option("--window", window, "window length N_w (default 100)");
  auto* o_stride = app.add_option("--stride", stride, "window stride for estimate (default 1)");
  auto* o_xth = app.add_option("--xth", xth, "outage threshold in dB");
  auto* o_ablation = app.add_option("--ablation", ablation, "none | constant-threshold");
  auto* f_verbose = app.add_flag("-v,--verbose", "debug logging");
  auto* f_quiet = app.add_flag("-q,--quiet", "warnings only");

  app.add_subcommand("synth", "generate a synthetic multi-regime stream");
  app.add_subcommand("augment", "train hybrid generators and write an augmented dataset");
  app.add_subcommand("train", "fit regimes, the threshold net and the parameter net");
  app.add_subcommand("estimate", "stream window estimates from a checkpoint");
  app.add_subcommand("evaluate", "score tail models on held-out windows");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    log << "error: " << e.what() << '\n';
    return kConfigError;
  }

  if (*o_config) flags.config = config;
  if (*o_seed) flags.seed = seed;
  if (*o_out) flags.out = out_dir;
  if (*o_data) flags.data = data;
  if (*o_checkpoint) flags.checkpoint = checkpoint;
  if (*o_window) flags.window = window;
  if (*o_stride) flags.stride = stride;
  if (*o_xth) flags.xth = xth;
  if (*o_ablation) flags.ablation = ablation;
  if (*f_verbose) flags.verbosity = 2;
  if (*f_quiet) flags.verbosity = 0;

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, flags, log);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    log << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const NumericalError& e) {
    log << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const FitError& e) {
    log << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const DomainError& e) {
    log << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const DimensionError& e) {
    log << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace tailgan::cli
