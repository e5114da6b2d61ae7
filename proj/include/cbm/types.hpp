#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <vector>

namespace cbm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

/// Median of the given values (copied; empty input returns NaN).
inline double median_of(std::vector<double> values) {
  if (values.empty()) return missing_value();
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(mid), values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(mid) - 1,
                   values.begin() + static_cast<long>(mid));
  return 0.5 * (values[mid - 1] + hi);
}

}  // namespace cbm
