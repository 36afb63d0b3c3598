#include "blvt/metrics/metrics.hpp"

#include <cmath>

#include "blvt/errors.hpp"

namespace blvt::metrics {

double sharpe(std::span<const double> returns) {
  const auto T = returns.size();
  if (T < 2) throw RangeError("sharpe: need at least two returns");
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(T);
  double ss = 0.0;
  for (double r : returns) {
    const double d = r - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(T - 1));
  if (sd < 1e-15) throw ZeroVolatilityError("sharpe: zero volatility");
  return mean / sd;
}

double fapv(std::span<const double> returns) {
  double v = 1.0;
  for (double r : returns) v *= 1.0 + r;
  return v;
}

double mdd(std::span<const double> values) {
  if (values.empty()) throw RangeError("mdd: empty value curve");
  double peak = 0.0;
  double worst = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) throw RangeError("mdd: value curve must be positive");
    if (v > peak) peak = v;
    const double dd = (peak - v) / peak;
    if (dd > worst) worst = dd;
  }
  return worst;
}

MetricsRow from_value_curve(std::span<const double> values) {
  if (values.size() < 3) throw RangeError("from_value_curve: need at least three values");
  std::vector<double> rets;
  rets.reserve(values.size() - 1);
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i - 1] > 0.0)) throw RangeError("from_value_curve: non-positive value");
    rets.push_back(values[i] / values[i - 1] - 1.0);
  }
  MetricsRow row;
  row.sharpe = sharpe(rets);
  row.fapv = values.back() / values.front();
  row.mdd = mdd(values);
  return row;
}

}  // namespace blvt::metrics
