#pragma once

#include "json.hpp"
#include "tailgan/nn/adam.hpp"
#include "tailgan/nn/dense_net.hpp"

namespace tailgan::nn {

// Versioned JSON form of a network: architecture, activation tags and
// row-major parameter arrays. Doubles are written in shortest round-trip form,
// so from_json(to_json(net)) reproduces every parameter bit for bit.
nlohmann::json to_json(const DenseNet& net);
DenseNet dense_net_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const AdamState& state);
AdamState adam_state_from_json(const nlohmann::json& doc);

}  // namespace tailgan::nn
