#pragma once

#include <span>
#include <vector>

namespace blvt::metrics {

// One row of a results table: per-period Sharpe ratio, final accumulated
// portfolio value (initial value 1) and maximum drawdown.
struct MetricsRow {
  double sharpe = 0.0;
  double fapv = 1.0;
  double mdd = 0.0;
};

// Mean period return divided by the sample standard deviation (Bessel
// corrected, 1/(T-1)). The risk-free rate is omitted. Reported per period,
// without annualization. Throws ZeroVolatilityError when the sample
// standard deviation falls below 1e-15.
double sharpe(std::span<const double> returns);

// Product of (1 + R_t). Empty input gives 1.
double fapv(std::span<const double> returns);

// Largest peak-to-trough fractional decline of a positive value curve,
// using the running peak. Throws RangeError on empty or non-positive input.
double mdd(std::span<const double> values);

// Convenience: metrics of a logged value curve (values[0] is the initial
// capital; returns are successive ratios).
MetricsRow from_value_curve(std::span<const double> values);

}  // namespace blvt::metrics
