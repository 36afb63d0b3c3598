#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blvt/data/series.hpp"
#include "blvt/metrics/metrics.hpp"
#include "blvt/nn/model.hpp"
#include "blvt/portfolio/portfolio.hpp"
#include "blvt/training/training.hpp"

namespace blvt::backtest {

enum class StrategyKind { NS, SVC1, SVC2, NWP, EWP, GMVP, BTC_HOLD };

const char* strategy_name(StrategyKind kind);
const char* scheme_name(training::FeeScheme scheme);

// One evaluable strategy. Learned kinds (NS, SVC1, SVC2) carry a non-owning
// pointer to trained parameters plus the config that shaped them; the
// benchmark kinds only need an estimation window.
struct Strategy {
  StrategyKind kind = StrategyKind::EWP;
  const nn::ModelParams* params = nullptr;
  training::TrainConfig config{};
  int window = 48;  // GMVP covariance window / NWP beta window

  // Leading rows of the series that are lookback history, not traded.
  std::size_t lookback_rows() const;
  void validate() const;  // ConfigError on missing params etc.
};

struct BacktestReport {
  StrategyKind strategy = StrategyKind::EWP;
  std::string period;  // label, e.g. "P1"
  training::FeeScheme scheme = training::FeeScheme::NO_FEE;
  std::uint64_t seed = 0;         // learned kinds: training seed
  std::uint64_t config_hash = 0;  // learned kinds: config identity
  metrics::MetricsRow metrics;

  // Audit trail. values[0] = 1 before entry, values[1] = post-entry value at
  // the same timestamp, then one value per hour. times and weights are
  // parallel to values (weights repeats the held allocation on the final,
  // trade-free step).
  std::vector<Timestamp> times;
  std::vector<portfolio::Pair> weights;
  std::vector<double> values;

  std::size_t n_steps() const { return values.size() < 2 ? 0 : values.size() - 2; }
};

// Closed-form two-asset global minimum variance weights from hourly return
// windows: w_u = (var_d - cov) / (var_u + var_d - 2 cov), clamped to [0,1],
// w_d = 1 - w_u. Sample covariance with Bessel correction. Throws
// DegenerateCovarianceError when the denominator is below 1e-15 and
// LengthError on mismatched or too-short windows.
portfolio::Pair gmvp_weights(std::span<const double> returns_u,
                             std::span<const double> returns_d);

portfolio::Pair ewp_weights();

// Neutral weights from trailing-K closes; infeasible or degenerate steps
// fall back to previous (logged), so no neutral errors escape.
class NwpState {
 public:
  explicit NwpState(int K) : K_(K) {}
  portfolio::Pair decide(std::span<const double> closes_u, std::span<const double> closes_d,
                         Timestamp t);

 private:
  int K_;
  portfolio::Pair prev_{0.5, 0.5};
};

// Hourly walk-forward loop. The series must carry at least lookback_rows()
// of history ahead of the traded span; trading starts at test_start when
// given (which must itself leave enough lookback), else at the first row
// past the lookback. Entry buys the first allocation from value 1 with the
// buy-side fee under a fee-charging schedule; BTC_HOLD pays no fees at all.
BacktestReport run_backtest(const Strategy& strategy, const data::AlignedSeries& test,
                            const portfolio::FeeSchedule& fees, Timestamp test_start = 0);

// Largest absolute discrepancy between the stored metrics and metrics
// recomputed from the logged value curve.
double audit_error(const BacktestReport& report);

// Single-report JSON object:
// {strategy, period, fee_scheme, seed, sharpe, fapv, mdd, n_steps, config_hash}
std::string report_json(const BacktestReport& report);

struct SummaryTable {
  std::string text;  // aligned per-period breakdown + cross-period averages
  std::string csv;   // one row per (scheme, strategy, period) + avg columns
};

// Per-period breakdown plus cross-period average Sharpe (mean +- sample std
// across seeds; learned kinds show the median-by-average-Sharpe seed in the
// breakdown). Requires a complete (scheme x strategy x period) grid over the
// combinations present, each seed covering every period: MissingCellError
// otherwise.
SummaryTable report_table(std::span<const BacktestReport> reports);

}  // namespace blvt::backtest
