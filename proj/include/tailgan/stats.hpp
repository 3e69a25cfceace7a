#pragma once

#include <span>
#include <vector>

namespace tailgan::stats {

double mean(std::span<const double> values);

// Unbiased (n - 1) sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> values);

// Quantile of already sorted values by linear interpolation of order
// statistics: h = (n - 1) p, q = x[floor h] + frac(h) (x[floor h + 1] - x[floor h]).
double quantile_sorted(std::span<const double> sorted, double p);

// Sorts a copy and calls quantile_sorted.
double quantile(std::span<const double> values, double p);

double median(std::span<const double> values);

std::vector<double> sorted_copy(std::span<const double> values);

}  // namespace tailgan::stats
