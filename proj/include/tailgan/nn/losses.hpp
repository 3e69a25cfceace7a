#pragma once

#include <span>
#include <vector>

namespace tailgan::nn {

struct LossValue {
  double value = 0.0;
  std::vector<double> grad;  // d loss / d logit, one per logit
};

// Mean of -[y log s(l) + (1 - y) log(1 - s(l))] in the overflow-free form
// max(l, 0) - l y + log(1 + exp(-|l|)).
LossValue bce_with_logits(std::span<const double> logits, std::span<const double> labels);

// Same loss with one label shared by every logit.
LossValue bce_with_logits(std::span<const double> logits, double label);

}  // namespace tailgan::nn
