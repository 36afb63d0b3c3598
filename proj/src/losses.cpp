#include "blvt/losses/losses.hpp"

#include <algorithm>
#include <cmath>

#include "blvt/errors.hpp"
#include "blvt/metrics/metrics.hpp"

namespace blvt::losses {

void LossConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("loss config: gamma must lie in [0,1]");
  if (!(xi >= 0.0)) throw ConfigError("loss config: xi must be non-negative");
}

void TrajectoryBatch::validate() const {
  const auto T = weights.size();
  if (prices.size() != T || volumes.size() != T || beta_market.size() != T ||
      returns.size() != T)
    throw LengthError("trajectory batch: field lengths disagree");
}

double loss_baseline(const TrajectoryBatch& batch) {
  return -metrics::sharpe(batch.returns);
}

double beta_model(std::array<double, 2> w, std::array<double, 2> y) {
  if (!(y[0] > 0.0 && y[1] > 0.0)) throw RangeError("beta_model: prices must be positive");
  if (w[0] < 1e-12) throw DivisionGuardError("beta_model: up weight below 1e-12");
  return -(y[0] * w[1]) / (y[1] * w[0]);
}

std::pair<double, double> margin_terms(double beta_model, double beta_market, double gamma) {
  return {beta_model - (1.0 + gamma) * beta_market, (1.0 - gamma) * beta_market - beta_model};
}

double hl1(std::array<double, 2> w, std::array<double, 2> y, double v_u, double beta_market,
           double gamma) {
  const auto [c1, c2] = margin_terms(beta_model(w, y), beta_market, gamma);
  return std::max(0.0, -(v_u * v_u) * c1 * c2);
}

double hl2(std::array<double, 2> w, std::array<double, 2> y, double v_u, double beta_market,
           double gamma) {
  const auto [c1, c2] = margin_terms(beta_model(w, y), beta_market, gamma);
  const double a = std::max(0.0, -v_u * c1);
  const double b = std::max(0.0, -v_u * c2);
  return a * a + b * b;
}

double loss_combined(const TrajectoryBatch& batch, const LossConfig& cfg) {
  cfg.validate();
  batch.validate();
  const double base = loss_baseline(batch);
  if (cfg.variant == Variant::BASELINE || cfg.xi == 0.0) return base;

  const auto T = batch.size();
  double penalty = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double v_u = batch.volumes[t][0];
    penalty += cfg.variant == Variant::L1
                   ? hl1(batch.weights[t], batch.prices[t], v_u, batch.beta_market[t], cfg.gamma)
                   : hl2(batch.weights[t], batch.prices[t], v_u, batch.beta_market[t], cfg.gamma);
  }
  return base + cfg.xi * penalty / static_cast<double>(T);
}

}  // namespace blvt::losses
