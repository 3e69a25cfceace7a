#include "tailgan/nn/dense_net.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "tailgan/errors.hpp"

namespace tailgan::nn {
namespace {

std::atomic<std::uint64_t> g_revision{0};

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix apply_activation(const Activation& act, const Matrix& z) {
  switch (act.kind) {
    case ActivationKind::identity:
      return z;
    case ActivationKind::relu:
      return z.cwiseMax(0.0);
    default:
      return z.unaryExpr([&act](double x) { return activate(act, x); });
  }
}

}  // namespace

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::identity: return "identity";
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::softplus: return "softplus";
    case ActivationKind::sigmoid: return "sigmoid";
  }
  return "identity";
}

ActivationKind activation_kind_from_string(std::string_view name) {
  if (name == "identity") return ActivationKind::identity;
  if (name == "relu") return ActivationKind::relu;
  if (name == "leaky_relu") return ActivationKind::leaky_relu;
  if (name == "tanh") return ActivationKind::tanh;
  if (name == "softplus") return ActivationKind::softplus;
  if (name == "sigmoid") return ActivationKind::sigmoid;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

double activate(const Activation& act, double x) {
  switch (act.kind) {
    case ActivationKind::identity: return x;
    case ActivationKind::relu: return x > 0.0 ? x : 0.0;
    case ActivationKind::leaky_relu: return x > 0.0 ? x : act.slope * x;
    case ActivationKind::tanh: return std::tanh(x);
    case ActivationKind::softplus: return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
    case ActivationKind::sigmoid: return sigmoid(x);
  }
  return x;
}

double activate_derivative(const Activation& act, double x) {
  switch (act.kind) {
    case ActivationKind::identity: return 1.0;
    case ActivationKind::relu: return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::leaky_relu: return x > 0.0 ? 1.0 : act.slope;
    case ActivationKind::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::softplus: return sigmoid(x);
    case ActivationKind::sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

Vector Gradients::flatten() const {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < weight.size(); ++l) total += weight[l].size() + bias[l].size();
  Vector out(total);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weight.size(); ++l) {
    out.segment(at, weight[l].size()) = Eigen::Map<const Vector>(weight[l].data(), weight[l].size());
    at += weight[l].size();
    out.segment(at, bias[l].size()) = bias[l];
    at += bias[l].size();
  }
  return out;
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DimensionError("a network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw DimensionError("bias length does not match layer width");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw DimensionError("layer " + std::to_string(l) + " input width does not chain");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw DomainError("network parameters must be finite");
    }
  }
  touch();
}

DenseNet DenseNet::create(std::span<const std::size_t> widths, Activation hidden,
                          Activation output, Rng& rng) {
  if (widths.size() < 2) throw DimensionError("need at least input and output widths");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(widths[l + 1]);
    const Activation act = (l + 2 == widths.size()) ? output : hidden;
    const bool rectifier =
        act.kind == ActivationKind::relu || act.kind == ActivationKind::leaky_relu;
    const double limit = rectifier ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                   : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out), act};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = limit * (2.0 * rng.uniform() - 1.0);
    }
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

std::size_t DenseNet::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t DenseNet::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

ForwardPass DenseNet::forward(const Matrix& batch) const {
  if (static_cast<std::size_t>(batch.cols()) != input_dim()) {
    throw DimensionError("batch width " + std::to_string(batch.cols()) + " != network input " +
                         std::to_string(input_dim()));
  }
  ForwardPass pass;
  pass.tape.revision = revision_;
  pass.tape.inputs.reserve(layers_.size());
  pass.tape.pre_activations.reserve(layers_.size());
  Matrix a = batch;
  for (const auto& layer : layers_) {
    Matrix z = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    pass.tape.inputs.push_back(std::move(a));
    a = apply_activation(layer.activation, z);
    pass.tape.pre_activations.push_back(std::move(z));
  }
  pass.output = std::move(a);
  return pass;
}

Matrix DenseNet::predict(const Matrix& batch) const {
  if (static_cast<std::size_t>(batch.cols()) != input_dim()) {
    throw DimensionError("batch width does not match network input");
  }
  Matrix a = batch;
  for (const auto& layer : layers_) {
    Matrix z = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    a = apply_activation(layer.activation, z);
  }
  return a;
}

Gradients DenseNet::backward(const GradTape& tape, const Matrix& output_grad) const {
  if (tape.revision != revision_ || tape.inputs.size() != layers_.size()) {
    throw std::logic_error("stale gradient tape: parameters changed since forward()");
  }
  const Matrix& last = tape.pre_activations.back();
  if (output_grad.rows() != last.rows() || output_grad.cols() != last.cols()) {
    throw DimensionError("output gradient shape does not match forward output");
  }
  Gradients grads;
  grads.weight.resize(layers_.size());
  grads.bias.resize(layers_.size());
  Matrix upstream = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    const Matrix& z = tape.pre_activations[k];
    Matrix dz;
    if (layer.activation.kind == ActivationKind::identity) {
      dz = std::move(upstream);
    } else {
      const Activation act = layer.activation;
      dz = upstream.cwiseProduct(z.unaryExpr([act](double x) { return activate_derivative(act, x); }));
    }
    grads.weight[k] = dz.transpose() * tape.inputs[k];
    grads.bias[k] = dz.colwise().sum().transpose();
    upstream = dz * layer.weight;
  }
  grads.input = std::move(upstream);
  return grads;
}

Vector DenseNet::parameters() const {
  Vector out(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (const auto& layer : layers_) {
    out.segment(at, layer.weight.size()) = Eigen::Map<const Vector>(layer.weight.data(), layer.weight.size());
    at += layer.weight.size();
    out.segment(at, layer.bias.size()) = layer.bias;
    at += layer.bias.size();
  }
  return out;
}

void DenseNet::set_parameters(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw DimensionError("flat parameter vector has the wrong length");
  }
  if (!flat.allFinite()) throw DomainError("network parameters must be finite");
  Eigen::Index at = 0;
  for (auto& layer : layers_) {
    Eigen::Map<Vector>(layer.weight.data(), layer.weight.size()) = flat.segment(at, layer.weight.size());
    at += layer.weight.size();
    layer.bias = flat.segment(at, layer.bias.size());
    at += layer.bias.size();
  }
  touch();
}

void DenseNet::touch() { revision_ = ++g_revision; }

}  // namespace tailgan::nn
