#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "blvt/cli/cli.hpp"
#include "blvt/errors.hpp"

namespace {

struct Overrides {
  std::optional<std::string> data_dir, out_dir, start, end, base_url, loss, fees, report_dir;
  std::optional<double> gamma, xi, lr, weight_decay;
  std::optional<int> batch_size, epochs, period, max_configs, hidden, T_seq, L, K, L_norm;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  std::vector<int> periods;
  std::optional<bool> gap_fill;
};

void apply(const Overrides& o, blvt::cli::CliConfig& cfg) {
  using blvt::cli::CliConfig;
  if (o.data_dir) cfg.data_dir = *o.data_dir;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.start) cfg.start = *o.start;
  if (o.end) cfg.end = *o.end;
  if (o.base_url) cfg.base_url = *o.base_url;
  if (o.report_dir) cfg.report_dir = *o.report_dir;
  if (o.gap_fill) cfg.gap_fill = *o.gap_fill;
  if (o.loss) {
    if (*o.loss == "baseline") cfg.train.loss.variant = blvt::losses::Variant::BASELINE;
    else if (*o.loss == "l1") cfg.train.loss.variant = blvt::losses::Variant::L1;
    else if (*o.loss == "l2") cfg.train.loss.variant = blvt::losses::Variant::L2;
    else throw blvt::ConfigError("unknown loss variant " + *o.loss);
  }
  if (o.fees) {
    if (*o.fees == "none") cfg.train.fee_scheme = blvt::training::FeeScheme::NO_FEE;
    else if (*o.fees == "binance" || *o.fees == "fee")
      cfg.train.fee_scheme = blvt::training::FeeScheme::FEE;
    else throw blvt::ConfigError("unknown fee scheme " + *o.fees);
  }
  if (o.gamma) cfg.train.loss.gamma = *o.gamma;
  if (o.xi) cfg.train.loss.xi = *o.xi;
  if (o.lr) cfg.train.base_lr = *o.lr;
  if (o.weight_decay) cfg.train.weight_decay = *o.weight_decay;
  if (o.batch_size) cfg.train.batch_size = *o.batch_size;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.hidden) cfg.train.hidden = *o.hidden;
  if (o.T_seq) cfg.train.T_seq = *o.T_seq;
  if (o.L) cfg.train.L = *o.L;
  if (o.K) cfg.train.K = *o.K;
  if (o.L_norm) cfg.train.L_norm = *o.L_norm;
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.period) cfg.period = *o.period;
  if (o.max_configs) cfg.max_configs = *o.max_configs;
  if (!o.strategies.empty()) cfg.strategies = o.strategies;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (!o.periods.empty()) cfg.periods = o.periods;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-token leveraged pair allocator: data, training, backtests, reports"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides o;
  app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--data-dir", o.data_dir, "data cache directory");
  app.add_option("--out-dir", o.out_dir, "artifact root directory");
  app.add_option("--start", o.start, "series start, inclusive open time");
  app.add_option("--end", o.end, "series end, inclusive open time");
  app.add_option("--base-url", o.base_url, "klines endpoint base URL");
  app.add_option("--loss", o.loss, "loss variant: baseline|l1|l2");
  app.add_option("--fees", o.fees, "fee scheme: none|binance");
  app.add_option("--gamma", o.gamma, "margin half-width");
  app.add_option("--xi", o.xi, "penalty weight");
  app.add_option("--lr", o.lr, "base learning rate");
  app.add_option("--weight-decay", o.weight_decay, "decoupled weight decay");
  app.add_option("--batch-size", o.batch_size, "segments per optimizer step");
  app.add_option("--epochs", o.epochs, "training epochs");
  app.add_option("--hidden", o.hidden, "LSTM hidden size");
  app.add_option("--t-seq", o.T_seq, "decision points per trajectory");
  app.add_option("--lookback", o.L, "feature window length");
  app.add_option("--beta-window", o.K, "beta estimation window");
  app.add_option("--norm-block", o.L_norm, "normalization block length");
  app.add_option("--seed", o.seed, "training seed");
  app.add_option("--period", o.period, "walk-forward period for train (1-3)");
  app.add_option("--periods", o.periods, "walk-forward periods (1-3)")->delimiter(',');
  app.add_option("--strategies", o.strategies, "strategy list")->delimiter(',');
  app.add_option("--seeds", o.seeds, "seed list")->delimiter(',');
  app.add_option("--max-configs", o.max_configs, "grid budget, 0 = unlimited");
  app.add_option("--report-dir", o.report_dir, "backtest run directory to summarize");
  app.add_flag("--gap-fill,!--no-gap-fill", o.gap_fill, "forward-fill interior gaps");

  auto* fetch = app.add_subcommand("fetch", "download hourly klines into the data cache");
  auto* train = app.add_subcommand("train", "train one allocator configuration");
  auto* backtest = app.add_subcommand("backtest", "run the full strategy/period/scheme grid");
  auto* grid = app.add_subcommand("grid", "hyperparameter search with resume");
  auto* report = app.add_subcommand("report", "re-emit the summary of a stored backtest");
  for (auto* sub : {fetch, train, backtest, grid, report}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    blvt::cli::CliConfig cfg;
    if (!config_path.empty()) cfg = blvt::cli::load_config(config_path);
    apply(o, cfg);
    if (const char* env = std::getenv("BLVT_DATA_DIR")) cfg.data_dir = env;

    if (app.got_subcommand(fetch)) return blvt::cli::cmd_fetch(cfg);
    if (app.got_subcommand(train)) return blvt::cli::cmd_train(cfg);
    if (app.got_subcommand(backtest)) return blvt::cli::cmd_backtest(cfg);
    if (app.got_subcommand(grid)) return blvt::cli::cmd_grid(cfg);
    if (app.got_subcommand(report)) return blvt::cli::cmd_report(cfg);
  } catch (const blvt::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const blvt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
