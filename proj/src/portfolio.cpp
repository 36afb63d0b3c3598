#include "blvt/portfolio/portfolio.hpp"

#include <cmath>
#include <string>

#include "blvt/errors.hpp"

namespace blvt::portfolio {

namespace {

void require_weights(Pair w, const char* who) {
  if (!(w[0] >= -1e-12 && w[1] >= -1e-12))
    throw RangeError(std::string(who) + ": weights must be non-negative");
  if (std::abs(w[0] + w[1] - 1.0) > 1e-9)
    throw RangeError(std::string(who) + ": weights must sum to 1");
}

void require_prices(Pair y, const char* who) {
  if (!(y[0] > 0.0 && y[1] > 0.0))
    throw RangeError(std::string(who) + ": prices must be positive");
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

PortfolioState make_state(Pair weights, double value, Pair prices, Timestamp time) {
  require_weights(weights, "make_state");
  require_prices(prices, "make_state");
  if (!(value > 0.0)) throw RangeError("make_state: value must be positive");
  PortfolioState s;
  s.weights = weights;
  s.value = value;
  s.prices = prices;
  s.volumes = {value * weights[0] / prices[0], value * weights[1] / prices[1]};
  s.time = time;
  return s;
}

IntermediateState apply_price_move(const PortfolioState& state, Pair new_prices) {
  require_prices(new_prices, "apply_price_move");
  IntermediateState inter;
  const double va = new_prices[0] * state.volumes[0];
  const double vb = new_prices[1] * state.volumes[1];
  inter.value_prime = va + vb;
  inter.weights_prime = {va / inter.value_prime, vb / inter.value_prime};
  inter.volumes = state.volumes;
  return inter;
}

double shrinkage(Pair w_prime, Pair w_target, double c) {
  require_weights(w_prime, "shrinkage");
  require_weights(w_target, "shrinkage");
  if (!(c >= 0.0 && c < 1.0)) throw RangeError("shrinkage: fee rate out of [0,1)");
  if (c == 0.0) return 1.0;
  if (w_prime[0] == w_target[0] && w_prime[1] == w_target[1]) return 1.0;

  // Asset A is the sold one; exchange the indices when B is sold.
  int a = 0, b = 1;
  if (!(w_prime[0] > w_target[0])) {
    a = 1;
    b = 0;
  }
  const double num = (1.0 - c) + c * (w_prime[b] - w_prime[a] * (1.0 - c));
  const double den = (1.0 - c) + c * (w_target[b] - w_target[a] * (1.0 - c));
  if (!(den > 0.0)) throw DegenerateError("shrinkage: non-positive denominator");
  return num / den;
}

double shrinkage_iterative_oracle(Pair w_prime, Pair w_target, double c) {
  require_weights(w_prime, "shrinkage_iterative_oracle");
  require_weights(w_target, "shrinkage_iterative_oracle");
  if (c == 0.0) return 1.0;
  if (w_prime[0] == w_target[0] && w_prime[1] == w_target[1]) return 1.0;

  int a = 0, b = 1;
  if (!(w_prime[0] > w_target[0])) {
    a = 1;
    b = 0;
  }
  double mu = 1.0;
  for (int k = 0; k < 10'000; ++k) {
    const double next = 1.0 - c * (w_prime[a] - w_target[a] * mu) -
                        (c / (1.0 - c)) * (w_target[b] * mu - w_prime[b]);
    if (std::abs(next - mu) < 1e-14) return next;
    mu = next;
  }
  throw NonConvergenceError("shrinkage_iterative_oracle: no fixed point in 10000 steps");
}

int management_crossings(Timestamp prev_time, Timestamp new_time, int management_hour) {
  if (!(new_time > prev_time))
    throw RangeError("management_crossings: new_time must exceed prev_time");
  const std::int64_t offset = static_cast<std::int64_t>(management_hour) * kHour;
  return static_cast<int>(floor_div(new_time - offset, kDay) -
                          floor_div(prev_time - offset, kDay));
}

double management_factor(double m, int crossings) {
  double f = 1.0;
  for (int i = 0; i < crossings; ++i) f *= 1.0 - m;
  return f;
}

double apply_management_fee(double value, Timestamp prev_time, Timestamp new_time,
                            const FeeSchedule& schedule) {
  const int k = management_crossings(prev_time, new_time, schedule.management_hour);
  return value * management_factor(schedule.m, k);
}

std::pair<PortfolioState, double> reallocate(const PortfolioState& state, Pair w_target,
                                             Pair new_prices, Timestamp new_time,
                                             const FeeSchedule& schedule) {
  require_weights(w_target, "reallocate");
  const IntermediateState inter = apply_price_move(state, new_prices);
  const double mu = shrinkage(inter.weights_prime, w_target, schedule.c);
  const double value =
      apply_management_fee(mu * inter.value_prime, state.time, new_time, schedule);

  PortfolioState next;
  next.weights = w_target;
  next.value = value;
  next.prices = new_prices;
  next.volumes = {value * w_target[0] / new_prices[0], value * w_target[1] / new_prices[1]};
  next.time = new_time;
  const double ret = value / state.value - 1.0;
  return {next, ret};
}

}  // namespace blvt::portfolio
