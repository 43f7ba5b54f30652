#pragma once

// Brute-force oracle for the geometric median in 2-d: staged grid search over
// the sum-of-distances objective, refined until the step is below 1e-4.

#include <array>
#include <cmath>
#include <vector>

namespace testsupport {

inline double sum_of_distances(double x, double y,
                               const std::vector<std::array<double, 2>>& points) {
  double total = 0.0;
  for (const auto& p : points) total += std::hypot(x - p[0], y - p[1]);
  return total;
}

inline std::array<double, 2> grid_search_median(const std::vector<std::array<double, 2>>& points) {
  double lo_x = points[0][0], hi_x = points[0][0];
  double lo_y = points[0][1], hi_y = points[0][1];
  for (const auto& p : points) {
    lo_x = std::min(lo_x, p[0]);
    hi_x = std::max(hi_x, p[0]);
    lo_y = std::min(lo_y, p[1]);
    hi_y = std::max(hi_y, p[1]);
  }
  double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-3});
  double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
  const int n = 60;
  while (span / n > 1e-4) {
    double best = 1e300, bx = cx, by = cy;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        const double x = cx - span / 2 + span * i / n;
        const double y = cy - span / 2 + span * j / n;
        const double v = sum_of_distances(x, y, points);
        if (v < best) {
          best = v;
          bx = x;
          by = y;
        }
      }
    }
    cx = bx;
    cy = by;
    span = 4.0 * span / n;  // keep a margin around the best cell
  }
  return {cx, cy};
}

}  // namespace testsupport
