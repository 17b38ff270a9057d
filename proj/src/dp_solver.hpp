#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "segreg/piecewise.hpp"

namespace segreg::detail {

// Segment DP over prefix costs. `cost(k, h, b)` is the cost of giving the samples
// h..b-1 to segment k (1-based). Entries that cannot be reached stay at +inf.
template <class SegmentCostFn>
DpTable solve_segmentation(std::size_t n, int segments, int min_length, SegmentCostFn&& cost) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto m = static_cast<std::size_t>(min_length);
  DpTable table;
  table.segments = segments;
  table.n = n;
  table.cost.assign(static_cast<std::size_t>(segments) * (n + 1), inf);
  table.split.assign(static_cast<std::size_t>(segments) * (n + 1), 0);

  auto cell = [&](int k, std::size_t b) -> std::size_t {
    return static_cast<std::size_t>(k - 1) * (n + 1) + b;
  };

  for (std::size_t b = m; b <= n; ++b) {
    table.cost[cell(1, b)] = cost(1, std::size_t{0}, b);
    table.split[cell(1, b)] = 0;
  }
  for (int k = 2; k <= segments; ++k) {
    const std::size_t first_end = static_cast<std::size_t>(k) * m;
    for (std::size_t b = first_end; b <= n; ++b) {
      double best = inf;
      std::size_t best_h = 0;
      for (std::size_t h = static_cast<std::size_t>(k - 1) * m; h + m <= b; ++h) {
        const double prev = table.cost[cell(k - 1, h)];
        if (!std::isfinite(prev)) continue;
        const double candidate = prev + cost(k, h, b);
        if (candidate < best) {
          best = candidate;
          best_h = h;
        }
      }
      table.cost[cell(k, b)] = best;
      table.split[cell(k, b)] = best_h;
    }
  }
  return table;
}

}  // namespace segreg::detail
