#include "blvt/neutral/neutral.hpp"

#include <cstddef>

#include "blvt/errors.hpp"

namespace blvt::neutral {

BetaEstimate estimate_beta(std::span<const double> prices_u, std::span<const double> prices_d,
                           int K) {
  if (K < 2) throw RangeError("estimate_beta: window must be at least 2");
  const auto k = static_cast<std::size_t>(K);
  if (prices_u.size() < k || prices_d.size() < k)
    throw InsufficientHistoryError("estimate_beta: fewer samples than the window");

  const auto u = prices_u.subspan(prices_u.size() - k);
  const auto d = prices_d.subspan(prices_d.size() - k);

  double mean_u = 0.0, mean_d = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mean_u += u[i];
    mean_d += d[i];
  }
  mean_u /= static_cast<double>(k);
  mean_d /= static_cast<double>(k);

  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = d[i] - mean_d;
    sxx += dx * dx;
    sxy += dx * (u[i] - mean_u);
  }
  if (sxx / static_cast<double>(K - 1) < 1e-15)
    throw DegenerateRegressorError("estimate_beta: regressor variance below 1e-15");

  BetaEstimate out;
  out.beta_hat = sxy / sxx;
  out.alpha_hat = mean_u - out.beta_hat * mean_d;
  out.window = K;
  return out;
}

NeutralWeights neutral_weights(const BetaEstimate& beta, double y_u, double y_d) {
  if (!(y_u > 0.0 && y_d > 0.0)) throw RangeError("neutral_weights: prices must be positive");
  if (beta.beta_hat >= 0.0)
    throw NeutralInfeasibleError("neutral_weights: non-negative beta has no long-only solution");
  NeutralWeights w;
  w.w_u = 1.0 / (1.0 - beta.beta_hat * y_d / y_u);
  w.w_d = 1.0 - w.w_u;
  return w;
}

}  // namespace blvt::neutral
