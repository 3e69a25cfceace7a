#pragma once

#include <cstddef>
#include <optional>

#include "tailgan/gpd.hpp"

namespace tailgan {

struct WindowStats {
  std::size_t n = 0;    // samples in the window
  std::size_t n_u = 0;  // samples strictly below the threshold

  friend bool operator==(const WindowStats&, const WindowStats&) = default;
};

// Lower-tail model of one window: threshold plus GPD parameters of the deficits.
struct TailModel {
  double threshold = 0.0;
  GpdParams params;
  WindowStats stats;
  std::optional<std::size_t> regime;

  friend bool operator==(const TailModel&, const TailModel&) = default;
};

// Pr(Y < level) ~ (N_u / N) (1 - G(u - level)) for level < u.
double tail_probability(const TailModel& model, double level);

}  // namespace tailgan
