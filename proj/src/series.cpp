#include "tailgan/series.hpp"

#include <cmath>

#include "tailgan/errors.hpp"

namespace tailgan {

SampleSeries::SampleSeries(std::vector<double> values, double sample_period, std::string label)
    : values_(std::move(values)), sample_period_(sample_period), label_(std::move(label)) {
  if (!(sample_period_ > 0.0) || !std::isfinite(sample_period_)) {
    throw DomainError("sample period must be positive and finite");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DomainError("non-finite sample at index " + std::to_string(i));
    }
  }
}

SampleSeries SampleSeries::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > values_.size()) throw DomainError("slice out of range");
  return SampleSeries({values_.begin() + static_cast<std::ptrdiff_t>(begin),
                       values_.begin() + static_cast<std::ptrdiff_t>(end)},
                      sample_period_, label_);
}

}  // namespace tailgan
