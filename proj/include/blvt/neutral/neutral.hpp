#pragma once

#include <span>

#include "blvt/timeutil.hpp"

namespace blvt::neutral {

struct BetaEstimate {
  double beta_hat = 0.0;   // OLS slope of y_u on y_d, expected negative
  double alpha_hat = 0.0;  // intercept
  int window = 0;          // K samples used
  Timestamp anchor_time = 0;
};

struct NeutralWeights {
  double w_u = 0.0;
  double w_d = 0.0;
};

// OLS fit of y_u = alpha + beta * y_d over the last K samples of both series.
// Throws DegenerateRegressorError when the regressor variance is below 1e-15,
// InsufficientHistoryError when fewer than K samples are available.
BetaEstimate estimate_beta(std::span<const double> prices_u, std::span<const double> prices_d,
                           int K);

// Long-only weights that zero the portfolio's first-order sensitivity to the
// common price factor: w_u = 1 / (1 - beta * y_d / y_u), w_d = 1 - w_u.
// Throws NeutralInfeasibleError when beta_hat >= 0.
NeutralWeights neutral_weights(const BetaEstimate& beta, double y_u, double y_d);

}  // namespace blvt::neutral
