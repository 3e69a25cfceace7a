#include "tailgan/nn/serialization.hpp"

#include "tailgan/errors.hpp"

namespace tailgan::nn {
namespace {

constexpr int kNetFormatVersion = 1;

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const DenseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    nlohmann::json entry;
    entry["in"] = layer.weight.cols();
    entry["out"] = layer.weight.rows();
    entry["activation"] = to_string(layer.activation.kind);
    if (layer.activation.kind == ActivationKind::leaky_relu) entry["slope"] = layer.activation.slope;
    entry["weight"] = std::vector<double>(layer.weight.data(), layer.weight.data() + layer.weight.size());
    entry["bias"] = to_vector(layer.bias);
    layers.push_back(std::move(entry));
  }
  return {{"format", "tailgan.dense_net"}, {"version", kNetFormatVersion}, {"layers", std::move(layers)}};
}

DenseNet dense_net_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "tailgan.dense_net") {
      throw ConfigError("not a dense network document");
    }
    if (doc.at("version").get<int>() != kNetFormatVersion) {
      throw ConfigError("unsupported dense network version");
    }
    std::vector<DenseLayer> layers;
    for (const auto& entry : doc.at("layers")) {
      const auto in = entry.at("in").get<Eigen::Index>();
      const auto out = entry.at("out").get<Eigen::Index>();
      const auto weight = entry.at("weight").get<std::vector<double>>();
      const auto bias = entry.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(weight.size()) != in * out ||
          static_cast<Eigen::Index>(bias.size()) != out) {
        throw ConfigError("layer parameter arrays do not match the declared shape");
      }
      Activation act{activation_kind_from_string(entry.at("activation").get<std::string>())};
      if (entry.contains("slope")) act.slope = entry.at("slope").get<double>();
      DenseLayer layer{Matrix(out, in), to_eigen(bias), act};
      std::copy(weight.begin(), weight.end(), layer.weight.data());
      layers.push_back(std::move(layer));
    }
    return DenseNet(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed network document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed network document: ") + e.what());
  }
}

nlohmann::json to_json(const AdamState& state) {
  return {{"learning_rate", state.config.learning_rate},
          {"beta1", state.config.beta1},
          {"beta2", state.config.beta2},
          {"epsilon", state.config.epsilon},
          {"step", state.step},
          {"first_moment", to_vector(state.first_moment)},
          {"second_moment", to_vector(state.second_moment)}};
}

AdamState adam_state_from_json(const nlohmann::json& doc) {
  try {
    AdamState state;
    state.config = {doc.at("learning_rate").get<double>(), doc.at("beta1").get<double>(),
                    doc.at("beta2").get<double>(), doc.at("epsilon").get<double>()};
    state.step = doc.at("step").get<std::uint64_t>();
    state.first_moment = to_eigen(doc.at("first_moment").get<std::vector<double>>());
    state.second_moment = to_eigen(doc.at("second_moment").get<std::vector<double>>());
    if (state.first_moment.size() != state.second_moment.size()) {
      throw ConfigError("Adam moment arrays differ in length");
    }
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed optimizer document: ") + e.what());
  }
}

}  // namespace tailgan::nn
