#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tailgan/series.hpp"

namespace tailgan {

// Library default for the runs-declustering gap (in samples).
inline constexpr std::size_t kDefaultRunGap = 10;

// Lower-tail deficits z = u - y of the samples below threshold u, in time
// order, with the index of the sample that produced each deficit.
struct ExceedanceSet {
  std::vector<double> deficits;
  std::vector<std::size_t> source_indices;
  double threshold = 0.0;

  std::size_t size() const noexcept { return deficits.size(); }
  bool empty() const noexcept { return deficits.empty(); }
};

ExceedanceSet extract_exceedances(std::span<const double> values, double threshold);
ExceedanceSet extract_exceedances(const SampleSeries& series, double threshold);

// Runs declustering: consecutive exceedances whose index gap is <= run_gap
// form one cluster, and only the largest deficit of each cluster is kept
// (earliest index on ties). run_gap = 0 returns the input unchanged.
ExceedanceSet decluster_runs(const ExceedanceSet& exceedances,
                             std::size_t run_gap = kDefaultRunGap);

}  // namespace tailgan
