#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tailgan/random.hpp"

namespace tailgan::nn {

// Batches are row-major: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ActivationKind { identity, relu, leaky_relu, tanh, softplus, sigmoid };

struct Activation {
  ActivationKind kind = ActivationKind::identity;
  double slope = 0.01;  // negative-side slope of leaky_relu

  static Activation identity() { return {ActivationKind::identity}; }
  static Activation relu() { return {ActivationKind::relu}; }
  static Activation leaky_relu(double slope = 0.01) { return {ActivationKind::leaky_relu, slope}; }
  static Activation tanh() { return {ActivationKind::tanh}; }
  static Activation softplus() { return {ActivationKind::softplus}; }
  static Activation sigmoid() { return {ActivationKind::sigmoid}; }

  friend bool operator==(const Activation&, const Activation&) = default;
};

std::string to_string(ActivationKind kind);
ActivationKind activation_kind_from_string(std::string_view name);

// Elementwise activation value and derivative, exposed for tests.
double activate(const Activation& act, double x);
double activate_derivative(const Activation& act, double x);

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation;
};

// Values recorded by forward() that backward() needs. A tape is bound to the
// parameter revision it was recorded against.
struct GradTape {
  std::uint64_t revision = 0;
  std::vector<Matrix> inputs;           // input of each layer
  std::vector<Matrix> pre_activations;  // X W^T + b of each layer
};

struct ForwardPass {
  Matrix output;
  GradTape tape;
};

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
  Matrix input;  // d loss / d batch

  // Same ordering as DenseNet::parameters().
  Vector flatten() const;
};

class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  // Layer widths {in, h1, ..., out}. Weights are scaled-uniform: He-style for
  // relu/leaky_relu layers, Xavier-style otherwise. Biases start at zero.
  static DenseNet create(std::span<const std::size_t> widths, Activation hidden,
                         Activation output, Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  ForwardPass forward(const Matrix& batch) const;
  Matrix predict(const Matrix& batch) const;

  // Throws std::logic_error when the tape predates a parameter update.
  Gradients backward(const GradTape& tape, const Matrix& output_grad) const;

  // Layer by layer: weight (row-major) then bias.
  Vector parameters() const;
  void set_parameters(const Vector& flat);

  std::uint64_t revision() const noexcept { return revision_; }

 private:
  void touch();

  std::vector<DenseLayer> layers_;
  std::uint64_t revision_ = 0;
};

}  // namespace tailgan::nn
