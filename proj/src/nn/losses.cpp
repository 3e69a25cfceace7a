#include "tailgan/nn/losses.hpp"

#include <cmath>

#include "tailgan/errors.hpp"

namespace tailgan::nn {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename LabelAt>
LossValue bce_impl(std::span<const double> logits, LabelAt label_at) {
  if (logits.empty()) throw DomainError("binary cross-entropy of an empty batch");
  const double n = static_cast<double>(logits.size());
  LossValue out;
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double l = logits[i];
    const double y = label_at(i);
    out.value += std::max(l, 0.0) - l * y + std::log1p(std::exp(-std::abs(l)));
    out.grad[i] = (sigmoid(l) - y) / n;
  }
  out.value /= n;
  return out;
}

}  // namespace

LossValue bce_with_logits(std::span<const double> logits, std::span<const double> labels) {
  if (logits.size() != labels.size()) throw DimensionError("logits and labels differ in length");
  return bce_impl(logits, [labels](std::size_t i) { return labels[i]; });
}

LossValue bce_with_logits(std::span<const double> logits, double label) {
  return bce_impl(logits, [label](std::size_t) { return label; });
}

}  // namespace tailgan::nn
