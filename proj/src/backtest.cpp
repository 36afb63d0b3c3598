#include "blvt/backtest/backtest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <utility>

#include "blvt/data/features.hpp"
#include "blvt/errors.hpp"
#include "blvt/log.hpp"
#include "blvt/neutral/neutral.hpp"

namespace blvt::backtest {

const char* strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::NS: return "NS";
    case StrategyKind::SVC1: return "SVC1";
    case StrategyKind::SVC2: return "SVC2";
    case StrategyKind::NWP: return "NWP";
    case StrategyKind::EWP: return "EWP";
    case StrategyKind::GMVP: return "GMVP";
    case StrategyKind::BTC_HOLD: return "BTC";
  }
  return "?";
}

const char* scheme_name(training::FeeScheme scheme) {
  return scheme == training::FeeScheme::FEE ? "fee" : "no_fee";
}

namespace {

bool is_learned(StrategyKind k) {
  return k == StrategyKind::NS || k == StrategyKind::SVC1 || k == StrategyKind::SVC2;
}

// A perfectly hedged curve has zero volatility; its risk-adjusted return is
// zero by convention rather than a degenerate-input error.
double sharpe_or_zero(std::span<const double> returns) {
  try {
    return metrics::sharpe(returns);
  } catch (const ZeroVolatilityError&) {
    return 0.0;
  }
}

}  // namespace

std::size_t Strategy::lookback_rows() const {
  switch (kind) {
    case StrategyKind::NS:
    case StrategyKind::SVC1:
    case StrategyKind::SVC2:
      return static_cast<std::size_t>(config.L) + static_cast<std::size_t>(config.L_norm);
    case StrategyKind::NWP:
      return static_cast<std::size_t>(window - 1);
    case StrategyKind::GMVP:
      return static_cast<std::size_t>(window);
    case StrategyKind::EWP:
    case StrategyKind::BTC_HOLD:
      return 0;
  }
  return 0;
}

void Strategy::validate() const {
  if (is_learned(kind)) {
    if (params == nullptr)
      throw ConfigError(std::string("strategy ") + strategy_name(kind) +
                        ": missing trained parameters");
    params->validate();
    if (config.L < 1 || config.L_norm < 1)
      throw ConfigError("strategy: invalid lookback configuration");
  } else if (kind == StrategyKind::NWP || kind == StrategyKind::GMVP) {
    if (window < 2) throw ConfigError("strategy: estimation window must be at least 2");
  }
}

portfolio::Pair gmvp_weights(std::span<const double> returns_u,
                             std::span<const double> returns_d) {
  const std::size_t n = returns_u.size();
  if (n != returns_d.size()) throw LengthError("gmvp: return windows differ in length");
  if (n < 2) throw LengthError("gmvp: need at least 2 returns");

  double mu = 0.0, md = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mu += returns_u[i];
    md += returns_d[i];
  }
  mu /= static_cast<double>(n);
  md /= static_cast<double>(n);

  double var_u = 0.0, var_d = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = returns_u[i] - mu;
    const double dd = returns_d[i] - md;
    var_u += du * du;
    var_d += dd * dd;
    cov += du * dd;
  }
  const double bessel = static_cast<double>(n - 1);
  var_u /= bessel;
  var_d /= bessel;
  cov /= bessel;

  const double den = var_u + var_d - 2.0 * cov;
  if (den < 1e-15) throw DegenerateCovarianceError("gmvp: variance of the spread is degenerate");
  const double w_u = std::clamp((var_d - cov) / den, 0.0, 1.0);
  return {w_u, 1.0 - w_u};
}

portfolio::Pair ewp_weights() { return {0.5, 0.5}; }

portfolio::Pair NwpState::decide(std::span<const double> closes_u,
                                 std::span<const double> closes_d, Timestamp t) {
  try {
    const auto est = neutral::estimate_beta(closes_u, closes_d, K_);
    const auto w = neutral::neutral_weights(est, closes_u.back(), closes_d.back());
    prev_ = {w.w_u, w.w_d};
  } catch (const NeutralInfeasibleError&) {
    log::info("nwp: non-negative beta at " + format_utc(t) + ", holding previous weights");
  } catch (const DegenerateRegressorError&) {
    log::info("nwp: degenerate regressor at " + format_utc(t) + ", holding previous weights");
  }
  return prev_;
}

BacktestReport run_backtest(const Strategy& strategy, const data::AlignedSeries& test,
                            const portfolio::FeeSchedule& fees, Timestamp test_start) {
  strategy.validate();
  const std::size_t n = test.size();
  const std::size_t lookback = strategy.lookback_rows();
  const std::size_t start = test_start == 0 ? lookback : test.index_of(test_start);
  if (start < lookback)
    throw InsufficientHistoryError(std::string("backtest: ") + strategy_name(strategy.kind) +
                                   " needs " + std::to_string(lookback) +
                                   " rows of history before the test span");
  if (n < start + 3) throw RangeError("backtest: test span too short for metrics");

  const auto& ts = test.timestamps;
  BacktestReport rep;
  rep.strategy = strategy.kind;
  rep.scheme = (fees.c > 0.0 || fees.m > 0.0) ? training::FeeScheme::FEE
                                              : training::FeeScheme::NO_FEE;
  if (is_learned(strategy.kind)) {
    rep.seed = strategy.config.seed;
    if (strategy.config.not_after != 0 && strategy.config.not_after >= ts[start])
      throw ConfigError("backtest: checkpoint was trained into the test span");
  }

  const std::size_t curve_len = n - start + 1;
  rep.times.reserve(curve_len);
  rep.weights.reserve(curve_len);
  rep.values.reserve(curve_len);

  if (strategy.kind == StrategyKind::BTC_HOLD) {
    // Held outside the token pair: no trading fee, no management fee.
    const auto& btc = test.at(data::Ticker::BTC).close;
    rep.times.push_back(ts[start]);
    rep.weights.push_back({1.0, 0.0});
    rep.values.push_back(1.0);
    for (std::size_t t = start; t < n; ++t) {
      rep.times.push_back(ts[t]);
      rep.weights.push_back({1.0, 0.0});
      rep.values.push_back(btc[t] / btc[start]);
    }
  } else {
    const auto& up = test.at(data::Ticker::UP);
    const auto& down = test.at(data::Ticker::DOWN);

    std::optional<data::FeaturePipeline> features;
    if (is_learned(strategy.kind))
      features.emplace(test, strategy.config.L, strategy.config.L_norm);
    NwpState nwp(strategy.window);

    const auto decide = [&](std::size_t t) -> portfolio::Pair {
      switch (strategy.kind) {
        case StrategyKind::NS:
        case StrategyKind::SVC1:
        case StrategyKind::SVC2: {
          auto win = features->window(t);
          nn::Matrix m;
          m.rows = static_cast<std::size_t>(win.rows);
          m.cols = data::kFeatureCols;
          m.data = std::move(win.values);
          const auto w = nn::forward(*strategy.params, m);
          return {w[0], w[1]};
        }
        case StrategyKind::NWP:
          return nwp.decide(std::span(up.close).first(t + 1),
                            std::span(down.close).first(t + 1), ts[t]);
        case StrategyKind::EWP:
          return ewp_weights();
        case StrategyKind::GMVP: {
          const auto w = static_cast<std::size_t>(strategy.window);
          return gmvp_weights(std::span(up.returns).subspan(t - w, w),
                              std::span(down.returns).subspan(t - w, w));
        }
        default:
          throw ConfigError("backtest: unreachable strategy kind");
      }
    };

    // Entry: buy the first allocation from value 1; the buy side of the
    // round-trip fee applies when fees are on.
    const portfolio::Pair w0 = decide(start);
    const double p0 = fees.c > 0.0 ? 1.0 - fees.c : 1.0;
    auto state = portfolio::make_state(w0, p0, {up.close[start], down.close[start]}, ts[start]);
    rep.times.push_back(ts[start]);
    rep.weights.push_back(w0);
    rep.values.push_back(1.0);
    rep.times.push_back(ts[start]);
    rep.weights.push_back(w0);
    rep.values.push_back(p0);

    for (std::size_t t = start + 1; t < n; ++t) {
      const portfolio::Pair prices{up.close[t], down.close[t]};
      portfolio::Pair target;
      if (t + 1 < n) {
        target = decide(t);
      } else {
        target = portfolio::apply_price_move(state, prices).weights_prime;  // hold, no trade
      }
      auto [next, ret] = portfolio::reallocate(state, target, prices, ts[t], fees);
      (void)ret;
      state = next;
      rep.times.push_back(ts[t]);
      rep.weights.push_back(state.weights);
      rep.values.push_back(state.value);
    }
  }

  std::vector<double> all_returns(rep.values.size() - 1);
  for (std::size_t i = 0; i + 1 < rep.values.size(); ++i)
    all_returns[i] = rep.values[i + 1] / rep.values[i] - 1.0;
  // Sharpe is over hourly returns only; the entry tick is not an hourly
  // period and would bias the no-fee case with an artificial zero.
  rep.metrics.sharpe = sharpe_or_zero(std::span(all_returns).subspan(1));
  rep.metrics.fapv = metrics::fapv(all_returns);
  rep.metrics.mdd = metrics::mdd(rep.values);
  return rep;
}

double audit_error(const BacktestReport& report) {
  if (report.values.size() < 3) throw LengthError("audit: value curve too short");
  std::vector<double> all_returns(report.values.size() - 1);
  for (std::size_t i = 0; i + 1 < report.values.size(); ++i)
    all_returns[i] = report.values[i + 1] / report.values[i] - 1.0;
  const double ds = std::fabs(sharpe_or_zero(std::span(all_returns).subspan(1)) -
                              report.metrics.sharpe);
  const double df = std::fabs(metrics::fapv(all_returns) - report.metrics.fapv);
  const double dm = std::fabs(metrics::mdd(report.values) - report.metrics.mdd);
  return std::max({ds, df, dm});
}

std::string report_json(const BacktestReport& report) {
  nlohmann::json j;
  j["strategy"] = strategy_name(report.strategy);
  j["period"] = report.period;
  j["fee_scheme"] = scheme_name(report.scheme);
  j["seed"] = report.seed;
  j["sharpe"] = report.metrics.sharpe;
  j["fapv"] = report.metrics.fapv;
  j["mdd"] = report.metrics.mdd;
  j["n_steps"] = report.n_steps();
  j["config_hash"] = report.config_hash;
  return j.dump();
}

namespace {

std::string fmt(double v, const char* spec = "%.3f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

constexpr StrategyKind kDisplayOrder[] = {
    StrategyKind::NS,  StrategyKind::SVC1, StrategyKind::SVC2,    StrategyKind::NWP,
    StrategyKind::EWP, StrategyKind::GMVP, StrategyKind::BTC_HOLD};

}  // namespace

SummaryTable report_table(std::span<const BacktestReport> reports) {
  if (reports.empty()) throw MissingCellError("report table: no reports");

  std::set<std::string> period_set;
  std::set<training::FeeScheme> scheme_set;
  std::set<StrategyKind> kind_set;
  // (scheme, kind) -> seed -> period -> report
  std::map<std::pair<training::FeeScheme, StrategyKind>,
           std::map<std::uint64_t, std::map<std::string, const BacktestReport*>>>
      cells;
  for (const auto& r : reports) {
    period_set.insert(r.period);
    scheme_set.insert(r.scheme);
    kind_set.insert(r.strategy);
    auto& slot = cells[{r.scheme, r.strategy}][r.seed][r.period];
    if (slot != nullptr)
      throw ConfigError(std::string("report table: duplicate cell ") + strategy_name(r.strategy) +
                        "/" + r.period + "/" + scheme_name(r.scheme));
    slot = &r;
  }

  std::vector<std::string> periods(period_set.begin(), period_set.end());
  std::string text;
  std::string csv = "scheme,strategy,period,seed,sharpe,fapv,mdd,avg_sharpe_mean,avg_sharpe_std\n";

  for (const auto scheme : scheme_set) {
    text += std::string("== fees: ") + scheme_name(scheme) + " ==\n";
    char head[256];
    std::snprintf(head, sizeof head, "%-6s", "strat");
    text += head;
    for (const auto& p : periods) {
      std::snprintf(head, sizeof head, " %9s %9s %9s", (p + ".shrp").c_str(),
                    (p + ".fapv").c_str(), (p + ".mdd").c_str());
      text += head;
    }
    text += "   avg_sharpe\n";

    for (const auto kind : kDisplayOrder) {
      if (!kind_set.count(kind)) continue;
      const auto it = cells.find({scheme, kind});
      if (it == cells.end())
        throw MissingCellError(std::string("report table: no reports for ") +
                               strategy_name(kind) + " under scheme " + scheme_name(scheme));
      const auto& by_seed = it->second;

      // Per seed: average Sharpe across periods; every period must be there.
      std::vector<std::pair<double, std::uint64_t>> avg_by_seed;
      for (const auto& [seed, by_period] : by_seed) {
        double sum = 0.0;
        for (const auto& p : periods) {
          const auto pit = by_period.find(p);
          if (pit == by_period.end())
            throw MissingCellError(std::string("report table: missing ") + strategy_name(kind) +
                                   "/" + p + "/" + scheme_name(scheme) + " (seed " +
                                   std::to_string(seed) + ")");
          sum += pit->second->metrics.sharpe;
        }
        avg_by_seed.emplace_back(sum / static_cast<double>(periods.size()), seed);
      }

      double mean = 0.0;
      for (const auto& [a, s] : avg_by_seed) mean += a;
      mean /= static_cast<double>(avg_by_seed.size());
      double stdev = 0.0;
      if (avg_by_seed.size() > 1) {
        double ssq = 0.0;
        for (const auto& [a, s] : avg_by_seed) ssq += (a - mean) * (a - mean);
        stdev = std::sqrt(ssq / static_cast<double>(avg_by_seed.size() - 1));
      }

      std::stable_sort(avg_by_seed.begin(), avg_by_seed.end());
      const auto median_seed = avg_by_seed[(avg_by_seed.size() - 1) / 2].second;
      const auto& median_runs = by_seed.at(median_seed);

      char line[256];
      std::snprintf(line, sizeof line, "%-6s", strategy_name(kind));
      text += line;
      for (const auto& p : periods) {
        const auto& m = median_runs.at(p)->metrics;
        std::snprintf(line, sizeof line, " %9.3f %9.3f %9.3f", m.sharpe, m.fapv, m.mdd);
        text += line;
        csv += std::string(scheme_name(scheme)) + "," + strategy_name(kind) + "," + p + "," +
               std::to_string(median_seed) + "," + fmt(m.sharpe, "%.6f") + "," +
               fmt(m.fapv, "%.6f") + "," + fmt(m.mdd, "%.6f") + "," + fmt(mean, "%.6f") + "," +
               fmt(stdev, "%.6f") + "\n";
      }
      if (avg_by_seed.size() > 1)
        text += "   " + fmt(mean) + " +- " + fmt(stdev) + "\n";
      else
        text += "   " + fmt(mean) + "\n";
    }
    text += "\n";
  }
  return {std::move(text), std::move(csv)};
}

}  // namespace blvt::backtest
