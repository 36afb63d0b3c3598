#pragma once

#include <array>
#include <utility>

#include "blvt/timeutil.hpp"

namespace blvt::portfolio {

// Two-asset convention throughout: index 0 is asset A, index 1 is asset B.
using Pair = std::array<double, 2>;

struct FeeSchedule {
  double c = 0.0;            // trading fee rate, charged on both legs
  double m = 0.0;            // daily management fee rate
  int management_hour = 0;   // UTC hour at which m is charged

  static FeeSchedule binance() { return {0.00075, 0.0001, 0}; }
  static FeeSchedule none() { return {0.0, 0.0, 0}; }
};

struct PortfolioState {
  Pair weights{0.5, 0.5};
  double value = 1.0;
  Pair prices{1.0, 1.0};
  Pair volumes{0.5, 0.5};
  Timestamp time = 0;
};

// Post price move, pre reallocation. Volumes are untouched by a price change.
struct IntermediateState {
  double value_prime = 1.0;
  Pair weights_prime{0.5, 0.5};
  Pair volumes{0.5, 0.5};
};

// Builds a consistent state: volumes = value * weights / prices.
PortfolioState make_state(Pair weights, double value, Pair prices, Timestamp time);

IntermediateState apply_price_move(const PortfolioState& state, Pair new_prices);

// Closed-form value shrinkage of a two-asset reallocation from w_prime to
// w_target under symmetric fee rate c. Exactly one asset is sold; asset A is
// the one sold when w'_A > w_A, otherwise the roles swap.
double shrinkage(Pair w_prime, Pair w_target, double c);

// Fixed-point solution of the cost-balance equation. Test oracle for
// shrinkage(); converges when successive iterates differ by less than 1e-14.
double shrinkage_iterative_oracle(Pair w_prime, Pair w_target, double c);

// Multiplies value by (1-m)^k, k = management-hour crossings in
// (prev_time, new_time].
double apply_management_fee(double value, Timestamp prev_time, Timestamp new_time,
                            const FeeSchedule& schedule);

// Number of management-hour crossings in (prev_time, new_time].
int management_crossings(Timestamp prev_time, Timestamp new_time, int management_hour);

// (1-m)^k by repeated multiplication, shared by simulation paths so both
// produce bit-identical factors.
double management_factor(double m, int crossings);

// One full period close: price move, trade to w_target with fee shrinkage,
// then the management fee. Returns the new state and the period return R_t.
std::pair<PortfolioState, double> reallocate(const PortfolioState& state, Pair w_target,
                                             Pair new_prices, Timestamp new_time,
                                             const FeeSchedule& schedule);

}  // namespace blvt::portfolio
