#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "blvt/backtest/backtest.hpp"
#include "blvt/data/features.hpp"
#include "blvt/errors.hpp"
#include "blvt/neutral/neutral.hpp"
#include "blvt/rng.hpp"

#include "support/synth.hpp"

using doctest::Approx;
using blvt::backtest::BacktestReport;
using blvt::backtest::Strategy;
using blvt::backtest::StrategyKind;
using blvt::training::FeeScheme;

namespace {

double sample_variance(const std::vector<double>& z) {
  double m = 0.0;
  for (const double v : z) m += v;
  m /= static_cast<double>(z.size());
  double ss = 0.0;
  for (const double v : z) ss += (v - m) * (v - m);
  return ss / static_cast<double>(z.size() - 1);
}

BacktestReport stub_report(StrategyKind kind, const char* period, FeeScheme scheme,
                           std::uint64_t seed, double sharpe, double fapv, double mdd) {
  BacktestReport r;
  r.strategy = kind;
  r.period = period;
  r.scheme = scheme;
  r.seed = seed;
  r.metrics.sharpe = sharpe;
  r.metrics.fapv = fapv;
  r.metrics.mdd = mdd;
  return r;
}

}  // namespace

TEST_CASE("gmvp_weights closed form on hand-checked windows") {
  const std::vector<double> ru = {0.01, -0.01, 0.02, 0.00};
  const std::vector<double> rd = {-0.02, 0.02, -0.03, 0.01};
  // var_u = 5e-4/3, var_d = 1.7e-3/3, cov = -9e-4/3: w_u = 2600/4000.
  const auto w = blvt::backtest::gmvp_weights(ru, rd);
  CHECK(w[0] == Approx(0.65).epsilon(1e-12));
  CHECK(w[0] + w[1] == 1.0);

  // Mirror-image returns: the spread is symmetric, so the split is even.
  std::vector<double> neg(ru.size());
  for (std::size_t i = 0; i < ru.size(); ++i) neg[i] = -ru[i];
  const auto sym = blvt::backtest::gmvp_weights(ru, neg);
  CHECK(sym[0] == 0.5);
  CHECK(sym[1] == 0.5);

  // cov > var_u pushes the unclamped weight past 1.
  std::vector<double> tripled(ru.size());
  for (std::size_t i = 0; i < ru.size(); ++i) tripled[i] = 3.0 * ru[i];
  const auto hi = blvt::backtest::gmvp_weights(ru, tripled);
  CHECK(hi[0] == 1.0);
  CHECK(hi[1] == 0.0);
  const auto lo = blvt::backtest::gmvp_weights(tripled, ru);
  CHECK(lo[0] == 0.0);
  CHECK(lo[1] == 1.0);
}

TEST_CASE("gmvp_weights minimizes sample variance against a simplex grid") {
  blvt::Rng rng(2024);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> ru(48), rd(48);
    for (std::size_t i = 0; i < 48; ++i) {
      ru[i] = 0.004 * synth::gauss(rng);
      rd[i] = -0.7 * ru[i] + 0.003 * synth::gauss(rng);
    }
    const auto w = blvt::backtest::gmvp_weights(ru, rd);

    double best_w = 0.0, best_var = std::numeric_limits<double>::infinity();
    std::vector<double> z(48);
    for (int g = 0; g <= 1000; ++g) {
      const double wg = static_cast<double>(g) / 1000.0;
      for (std::size_t i = 0; i < 48; ++i) z[i] = wg * ru[i] + (1.0 - wg) * rd[i];
      const double v = sample_variance(z);
      if (v < best_var) {
        best_var = v;
        best_w = wg;
      }
    }
    INFO("window ", rep);
    CHECK(std::abs(w[0] - best_w) <= 1e-3);
  }
}

TEST_CASE("gmvp_weights guards") {
  const std::vector<double> a = {0.01, 0.02, 0.03};
  const std::vector<double> b = {0.01, 0.02};
  CHECK_THROWS_AS(blvt::backtest::gmvp_weights(a, b), blvt::LengthError);
  const std::vector<double> one = {0.01};
  CHECK_THROWS_AS(blvt::backtest::gmvp_weights(one, one), blvt::LengthError);
  // Identical windows: the spread has zero variance.
  CHECK_THROWS_AS(blvt::backtest::gmvp_weights(a, a), blvt::DegenerateCovarianceError);
}

TEST_CASE("ewp_weights is the even split") {
  const auto w = blvt::backtest::ewp_weights();
  CHECK(w[0] == 0.5);
  CHECK(w[1] == 0.5);
}

TEST_CASE("nwp falls back to the previous weights when infeasible") {
  blvt::backtest::NwpState st(4);

  // Positively correlated closes: infeasible, initial fallback is the even split.
  const std::vector<double> yd = {10.0, 11.0, 12.0, 13.0, 14.0};
  const std::vector<double> yu_pos = {20.0, 21.0, 22.0, 23.0, 24.0};
  const auto w0 = st.decide(yu_pos, yd, 0);
  CHECK(w0[0] == 0.5);
  CHECK(w0[1] == 0.5);

  // Feasible window: the neutral solution, bit for bit.
  const std::vector<double> yu_neg = {30.0, 29.0, 28.0, 27.0, 26.0};
  const auto est = blvt::neutral::estimate_beta(yu_neg, yd, 4);
  const auto nw = blvt::neutral::neutral_weights(est, yu_neg.back(), yd.back());
  const auto w1 = st.decide(yu_neg, yd, 3600);
  CHECK(w1[0] == nw.w_u);
  CHECK(w1[1] == nw.w_d);
  CHECK(w1[0] != 0.5);

  // Degenerate regressor: hold what we had.
  const std::vector<double> flat = {10.0, 10.0, 10.0, 10.0, 10.0};
  const auto w2 = st.decide(yu_neg, flat, 7200);
  CHECK(w2[0] == w1[0]);
  CHECK(w2[1] == w1[1]);
}

TEST_CASE("btc hold logs the feeless close-price ratio curve") {
  synth::PairSpec spec;
  spec.n = 50;
  spec.seed = 6;
  const auto series = synth::make_pair_series(spec);
  Strategy s;
  s.kind = StrategyKind::BTC_HOLD;

  const auto rep = blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::binance());
  CHECK(rep.scheme == FeeScheme::FEE);
  REQUIRE(rep.values.size() == 51);
  CHECK(rep.n_steps() == 49);
  CHECK(rep.values[0] == 1.0);
  CHECK(rep.values[1] == 1.0);
  CHECK(rep.times[0] == rep.times[1]);

  const auto& btc = series.at(blvt::data::Ticker::BTC).close;
  for (std::size_t k = 1; k < rep.values.size(); ++k) {
    CHECK(rep.values[k] == btc[k - 1] / btc[0]);
    CHECK(rep.weights[k][0] == 1.0);
    CHECK(rep.weights[k][1] == 0.0);
  }
  CHECK(blvt::backtest::audit_error(rep) < 1e-12);

  // Fees never touch a position held outside the pair.
  const auto feeless =
      blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::none());
  CHECK(feeless.values == rep.values);
  CHECK(feeless.scheme == FeeScheme::NO_FEE);
}

TEST_CASE("ewp fee curve replays through the portfolio module bit for bit") {
  synth::PairSpec spec;
  spec.n = 60;
  spec.seed = 5;
  const auto series = synth::make_pair_series(spec);
  const auto fees = blvt::portfolio::FeeSchedule::binance();
  Strategy s;
  s.kind = StrategyKind::EWP;

  const auto rep = blvt::backtest::run_backtest(s, series, fees);
  const std::size_t n = series.size();
  REQUIRE(rep.values.size() == n + 1);
  CHECK(rep.values[0] == 1.0);
  CHECK(rep.values[1] == 1.0 - fees.c);
  CHECK(rep.weights[0][0] == 0.5);
  CHECK(rep.weights[1][0] == 0.5);

  const auto& up = series.at(blvt::data::Ticker::UP);
  const auto& down = series.at(blvt::data::Ticker::DOWN);
  auto state = blvt::portfolio::make_state({0.5, 0.5}, 1.0 - fees.c,
                                           {up.close[0], down.close[0]}, series.timestamps[0]);
  for (std::size_t t = 1; t < n; ++t) {
    const blvt::portfolio::Pair prices{up.close[t], down.close[t]};
    blvt::portfolio::Pair target;
    if (t + 1 < n) {
      target = blvt::backtest::ewp_weights();
    } else {
      target = blvt::portfolio::apply_price_move(state, prices).weights_prime;
    }
    auto [next, ret] = blvt::portfolio::reallocate(state, target, prices,
                                                   series.timestamps[t], fees);
    (void)ret;
    state = next;
    CHECK(rep.values[t + 1] == state.value);
    CHECK(rep.weights[t + 1][0] == state.weights[0]);
    CHECK(rep.weights[t + 1][1] == state.weights[1]);
    CHECK(rep.times[t + 1] == series.timestamps[t]);
  }
  CHECK(blvt::backtest::audit_error(rep) < 1e-12);

  // Fees can only hurt the accumulated value.
  const auto untaxed =
      blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::none());
  CHECK(untaxed.values[1] == 1.0);
  CHECK(rep.metrics.fapv < untaxed.metrics.fapv);
  CHECK(rep.metrics.fapv == Approx(rep.values.back()).epsilon(1e-12));
}

TEST_CASE("gmvp strategy decides from the trailing return window") {
  synth::PairSpec spec;
  spec.n = 120;
  spec.seed = 12;
  const auto series = synth::make_pair_series(spec);
  Strategy s;
  s.kind = StrategyKind::GMVP;
  s.window = 48;

  const auto rep =
      blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::none());
  REQUIRE(rep.values.size() == 120 - 48 + 1);
  CHECK(rep.times[0] == series.timestamps[48]);

  const auto& up = series.at(blvt::data::Ticker::UP);
  const auto& down = series.at(blvt::data::Ticker::DOWN);
  const auto w0 = blvt::backtest::gmvp_weights(std::span(up.returns).subspan(0, 48),
                                               std::span(down.returns).subspan(0, 48));
  CHECK(rep.weights[0][0] == w0[0]);
  CHECK(rep.weights[0][1] == w0[1]);
  CHECK(blvt::backtest::audit_error(rep) < 1e-12);

  Strategy narrow = s;
  narrow.window = 1;
  CHECK_THROWS_AS(
      blvt::backtest::run_backtest(narrow, series, blvt::portfolio::FeeSchedule::none()),
      blvt::ConfigError);
}

TEST_CASE("nwp on an exactly hedgeable pair holds value to rounding error") {
  const auto series = synth::make_linear_pair(300, -0.7, 9);
  Strategy s;
  s.kind = StrategyKind::NWP;
  s.window = 48;

  const auto rep =
      blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::none());
  REQUIRE(rep.values.size() == 300 - 47 + 1);
  CHECK(rep.values[1] == 1.0);

  for (std::size_t k = 1; k + 1 < rep.values.size(); ++k) {
    const double step = rep.values[k + 1] / rep.values[k] - 1.0;
    CHECK(std::abs(step) < 1e-9);
  }
  CHECK(rep.metrics.mdd < 1e-8);

  const auto& up = series.at(blvt::data::Ticker::UP);
  const auto& down = series.at(blvt::data::Ticker::DOWN);
  const auto est = blvt::neutral::estimate_beta(std::span(up.close).first(48),
                                                std::span(down.close).first(48), 48);
  const auto nw = blvt::neutral::neutral_weights(est, up.close[47], down.close[47]);
  CHECK(rep.weights[0][0] == nw.w_u);
  CHECK(rep.weights[0][1] == nw.w_d);
}

TEST_CASE("learned strategy decides from the feature window") {
  synth::PairSpec spec;
  spec.n = 80;
  spec.seed = 18;
  const auto series = synth::make_pair_series(spec);

  const auto params = blvt::nn::init_params(7, blvt::data::kFeatureCols, 8);
  Strategy s;
  s.kind = StrategyKind::NS;
  s.params = &params;
  s.config.L = 6;
  s.config.L_norm = 4;
  s.config.hidden = 8;
  s.config.seed = 7;

  const auto rep =
      blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::none());
  CHECK(rep.seed == 7);
  REQUIRE(rep.values.size() == 80 - 10 + 1);
  CHECK(rep.times[0] == series.timestamps[10]);

  blvt::data::FeaturePipeline fp(series, 6, 4);
  auto win = fp.window(10);
  blvt::nn::Matrix m;
  m.rows = static_cast<std::size_t>(win.rows);
  m.cols = blvt::data::kFeatureCols;
  m.data = std::move(win.values);
  const auto w = blvt::nn::forward(params, m);
  CHECK(rep.weights[0][0] == w[0]);
  CHECK(rep.weights[0][1] == w[1]);
  CHECK(blvt::backtest::audit_error(rep) < 1e-12);
}

TEST_CASE("run_backtest start handling and guards") {
  synth::PairSpec spec;
  spec.n = 80;
  spec.seed = 18;
  const auto series = synth::make_pair_series(spec);
  const auto params = blvt::nn::init_params(7, blvt::data::kFeatureCols, 8);
  Strategy s;
  s.kind = StrategyKind::NS;
  s.params = &params;
  s.config.L = 6;
  s.config.L_norm = 4;
  s.config.hidden = 8;

  const auto rep = blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::none(),
                                                series.timestamps[15]);
  CHECK(rep.times[0] == series.timestamps[15]);
  CHECK(rep.values.size() == 80 - 15 + 1);

  CHECK_THROWS_AS(blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::none(),
                                               series.timestamps[5]),
                  blvt::InsufficientHistoryError);
  CHECK_THROWS_AS(blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::none(),
                                               series.timestamps[78]),
                  blvt::RangeError);

  // Walk-forward leak guard: training must end before the traded span.
  Strategy leaky = s;
  leaky.config.not_after = series.timestamps[10];
  CHECK_THROWS_AS(
      blvt::backtest::run_backtest(leaky, series, blvt::portfolio::FeeSchedule::none()),
      blvt::ConfigError);
  leaky.config.not_after = series.timestamps[9];
  CHECK_NOTHROW(
      blvt::backtest::run_backtest(leaky, series, blvt::portfolio::FeeSchedule::none()));

  Strategy missing = s;
  missing.params = nullptr;
  CHECK_THROWS_AS(
      blvt::backtest::run_backtest(missing, series, blvt::portfolio::FeeSchedule::none()),
      blvt::ConfigError);
}

TEST_CASE("audit_error detects tampered metrics") {
  synth::PairSpec spec;
  spec.n = 40;
  const auto series = synth::make_pair_series(spec);
  Strategy s;
  s.kind = StrategyKind::EWP;
  auto rep = blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::binance());
  CHECK(blvt::backtest::audit_error(rep) < 1e-12);
  rep.metrics.sharpe += 0.5;
  CHECK(blvt::backtest::audit_error(rep) == Approx(0.5).epsilon(1e-9));

  BacktestReport stub;
  stub.values = {1.0, 1.01};
  CHECK_THROWS_AS(blvt::backtest::audit_error(stub), blvt::LengthError);
}

TEST_CASE("report_json carries the identity and metric fields") {
  synth::PairSpec spec;
  spec.n = 40;
  const auto series = synth::make_pair_series(spec);
  Strategy s;
  s.kind = StrategyKind::EWP;
  auto rep = blvt::backtest::run_backtest(s, series, blvt::portfolio::FeeSchedule::binance());
  rep.period = "P2";
  rep.config_hash = 0xDEADBEEFull;

  const auto j = nlohmann::json::parse(blvt::backtest::report_json(rep));
  CHECK(j.at("strategy") == "EWP");
  CHECK(j.at("period") == "P2");
  CHECK(j.at("fee_scheme") == "fee");
  CHECK(j.at("seed") == 0);
  CHECK(j.at("sharpe").get<double>() == rep.metrics.sharpe);
  CHECK(j.at("fapv").get<double>() == rep.metrics.fapv);
  CHECK(j.at("mdd").get<double>() == rep.metrics.mdd);
  CHECK(j.at("n_steps") == rep.n_steps());
  CHECK(j.at("config_hash") == 0xDEADBEEFull);
}

TEST_CASE("report_table breaks down by period and averages across seeds") {
  std::vector<BacktestReport> reports;
  // NS across three seeds, two periods: per-seed averages 1.5, 0.5, 2.5.
  reports.push_back(stub_report(StrategyKind::NS, "P1", FeeScheme::NO_FEE, 1, 1.0, 1.1, 0.05));
  reports.push_back(stub_report(StrategyKind::NS, "P2", FeeScheme::NO_FEE, 1, 2.0, 1.2, 0.04));
  reports.push_back(stub_report(StrategyKind::NS, "P1", FeeScheme::NO_FEE, 2, 0.0, 1.0, 0.06));
  reports.push_back(stub_report(StrategyKind::NS, "P2", FeeScheme::NO_FEE, 2, 1.0, 1.1, 0.05));
  reports.push_back(stub_report(StrategyKind::NS, "P1", FeeScheme::NO_FEE, 3, 3.0, 1.3, 0.03));
  reports.push_back(stub_report(StrategyKind::NS, "P2", FeeScheme::NO_FEE, 3, 2.0, 1.2, 0.04));
  reports.push_back(stub_report(StrategyKind::EWP, "P1", FeeScheme::NO_FEE, 0, 0.5, 1.05, 0.07));
  reports.push_back(stub_report(StrategyKind::EWP, "P2", FeeScheme::NO_FEE, 0, 0.7, 1.06, 0.06));

  const auto table = blvt::backtest::report_table(reports);
  CHECK(table.text.find("== fees: no_fee ==") != std::string::npos);
  // Seed 1 is the median seed by period-average Sharpe; mean 1.5, std 1.0.
  CHECK(table.text.find("1.500 +- 1.000") != std::string::npos);
  CHECK(table.text.find("NS") < table.text.find("EWP"));
  CHECK(table.csv.find("no_fee,NS,P1,1,1.000000,1.100000,0.050000,1.500000,1.000000\n") !=
        std::string::npos);
  CHECK(table.csv.find("no_fee,EWP,P2,0,0.700000,1.060000,0.060000,0.600000,0.000000\n") !=
        std::string::npos);

  // A seed missing one period breaks the grid.
  auto incomplete = reports;
  incomplete.pop_back();
  incomplete.push_back(stub_report(StrategyKind::EWP, "P2", FeeScheme::NO_FEE, 9, 0.7, 1.06, 0.06));
  incomplete.push_back(stub_report(StrategyKind::EWP, "P1", FeeScheme::NO_FEE, 9, 0.5, 1.05, 0.07));
  incomplete.push_back(stub_report(StrategyKind::NS, "P1", FeeScheme::FEE, 1, 0.1, 1.0, 0.1));
  incomplete.push_back(stub_report(StrategyKind::NS, "P2", FeeScheme::FEE, 1, 0.1, 1.0, 0.1));
  // EWP seed 0 now lacks P2 under NO_FEE.
  CHECK_THROWS_AS(blvt::backtest::report_table(incomplete), blvt::MissingCellError);

  // A strategy absent under one scheme while present under another.
  auto lopsided = reports;
  lopsided.push_back(stub_report(StrategyKind::EWP, "P1", FeeScheme::FEE, 0, 0.2, 1.0, 0.1));
  lopsided.push_back(stub_report(StrategyKind::EWP, "P2", FeeScheme::FEE, 0, 0.2, 1.0, 0.1));
  CHECK_THROWS_AS(blvt::backtest::report_table(lopsided), blvt::MissingCellError);

  auto duplicated = reports;
  duplicated.push_back(reports[0]);
  CHECK_THROWS_AS(blvt::backtest::report_table(duplicated), blvt::ConfigError);

  CHECK_THROWS_AS(blvt::backtest::report_table({}), blvt::MissingCellError);
}
