#include "tailgan/exceedance.hpp"

#include <cmath>

#include "tailgan/errors.hpp"

namespace tailgan {

ExceedanceSet extract_exceedances(std::span<const double> values, double threshold) {
  if (!std::isfinite(threshold)) throw DomainError("threshold must be finite");
  ExceedanceSet out;
  out.threshold = threshold;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < threshold) {
      out.deficits.push_back(threshold - values[i]);
      out.source_indices.push_back(i);
    }
  }
  return out;
}

ExceedanceSet extract_exceedances(const SampleSeries& series, double threshold) {
  return extract_exceedances(series.values(), threshold);
}

ExceedanceSet decluster_runs(const ExceedanceSet& exceedances, std::size_t run_gap) {
  if (run_gap == 0 || exceedances.size() < 2) return exceedances;

  ExceedanceSet out;
  out.threshold = exceedances.threshold;
  std::size_t best = 0;
  for (std::size_t i = 1; i <= exceedances.size(); ++i) {
    const bool cluster_ends =
        i == exceedances.size() ||
        exceedances.source_indices[i] - exceedances.source_indices[i - 1] > run_gap;
    if (cluster_ends) {
      out.deficits.push_back(exceedances.deficits[best]);
      out.source_indices.push_back(exceedances.source_indices[best]);
      best = i;
    } else if (exceedances.deficits[i] > exceedances.deficits[best]) {
      best = i;
    }
  }
  return out;
}

}  // namespace tailgan
