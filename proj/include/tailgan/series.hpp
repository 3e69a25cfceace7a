#pragma once

#include <span>
#include <string>
#include <vector>

namespace tailgan {

// Time-indexed received-power samples in dB. Values are finite by construction.
class SampleSeries {
 public:
  SampleSeries() = default;
  SampleSeries(std::vector<double> values, double sample_period, std::string label = {});

  std::span<const double> values() const noexcept { return values_; }
  double sample_period() const noexcept { return sample_period_; }
  const std::string& label() const noexcept { return label_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }

  // Contiguous sub-series [begin, end).
  SampleSeries slice(std::size_t begin, std::size_t end) const;

 private:
  std::vector<double> values_;
  double sample_period_ = 1.0;
  std::string label_;
};

}  // namespace tailgan
