#include "tailgan/tail_model.hpp"

#include <cmath>

#include "tailgan/errors.hpp"

namespace tailgan {

double tail_probability(const TailModel& model, double level) {
  if (!std::isfinite(level)) throw DomainError("tail level must be finite");
  if (level >= model.threshold) {
    throw DomainError("tail_probability is only defined below the threshold");
  }
  if (model.stats.n == 0) throw DomainError("window size must be positive");
  if (model.stats.n_u > model.stats.n) throw DomainError("N_u exceeds N");
  const double rate = static_cast<double>(model.stats.n_u) / static_cast<double>(model.stats.n);
  return rate * (1.0 - gpd_cdf(model.threshold - level, model.params));
}

}  // namespace tailgan
