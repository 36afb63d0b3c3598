#pragma once

#include <array>
#include <utility>
#include <vector>

namespace blvt::losses {

enum class Variant { BASELINE, L1, L2 };

struct LossConfig {
  Variant variant = Variant::BASELINE;
  double gamma = 0.0;  // margin half-width around beta_market
  double xi = 0.0;     // penalty weight

  void validate() const;  // throws ConfigError on gamma/xi out of range
};

// Everything the loss needs from one simulated trajectory of T periods.
// Index 0 of each pair is the up token, index 1 the down token. weights[t]
// is the allocation the model chose at step t, prices[t] the close used for
// that decision, volumes[t] the post-trade volumes of the simulated
// portfolio (initial value 1), beta_market[t] the trailing OLS slope known
// at step t, and returns[t] the realized portfolio return of period t+1.
struct TrajectoryBatch {
  std::vector<std::array<double, 2>> weights;
  std::vector<std::array<double, 2>> prices;
  std::vector<std::array<double, 2>> volumes;
  std::vector<double> beta_market;
  std::vector<double> returns;

  std::size_t size() const { return weights.size(); }
  void validate() const;  // throws LengthError when field lengths disagree
};

// Negative Sharpe ratio of the batch returns.
double loss_baseline(const TrajectoryBatch& batch);

// -(y_u * w_d) / (y_d * w_u). Throws DivisionGuardError when w_u < 1e-12.
double beta_model(std::array<double, 2> w, std::array<double, 2> y);

// C1 = beta_model - (1+gamma)*beta_market, C2 = (1-gamma)*beta_market - beta_model.
std::pair<double, double> margin_terms(double beta_model, double beta_market, double gamma);

// max(0, -v_u^2 * C1 * C2)
double hl1(std::array<double, 2> w, std::array<double, 2> y, double v_u, double beta_market,
           double gamma);

// max(0, -v_u*C1)^2 + max(0, -v_u*C2)^2
double hl2(std::array<double, 2> w, std::array<double, 2> y, double v_u, double beta_market,
           double gamma);

// -SR_T + xi * (1/T) * sum of the configured hinge penalty.
double loss_combined(const TrajectoryBatch& batch, const LossConfig& cfg);

}  // namespace blvt::losses
