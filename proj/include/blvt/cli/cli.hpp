#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blvt/backtest/backtest.hpp"
#include "blvt/data/series.hpp"
#include "blvt/training/training.hpp"

namespace blvt::cli {

inline constexpr const char* kToolVersion = "blvt 1.0.0";

// Effective run configuration: JSON config file first, flag overrides on
// top, BLVT_DATA_DIR above both for the data directory.
struct CliConfig {
  std::string data_dir = "data";
  std::string out_dir = "runs";
  std::vector<std::string> symbols = {"BTCUSDT", "BTCUPUSDT", "BTCDOWNUSDT"};
  std::string start = "2020-05-15 00:00";
  std::string end = "2021-12-30 23:00";  // inclusive open_time
  bool gap_fill = true;
  std::string base_url = "https://api.binance.com";

  training::TrainConfig train;
  // Margin/penalty overrides for the two constrained variants when
  // backtesting all strategies from one config.
  double svc1_gamma = 0.2, svc1_xi = 3e-5;
  double svc2_gamma = 0.2, svc2_xi = 3e-5;

  int period = 1;                        // cmd_train
  std::vector<int> periods = {1, 2, 3};  // cmd_backtest / cmd_grid
  std::vector<std::string> strategies = {"ns", "svc1", "svc2", "nwp", "ewp", "gmvp", "btc"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  // Grid axes; empty axis = the train value alone.
  std::vector<int> grid_batch_sizes, grid_epochs;
  std::vector<double> grid_lrs, grid_weight_decays, grid_gammas, grid_xis;
  int max_configs = 0;  // 0 = no cap

  std::string report_dir;  // cmd_report input (default: latest backtest)

  void validate() const;  // ConfigError on contradictions
};

// Parses the JSON config file; unknown keys are rejected (typo guard).
CliConfig load_config(const std::string& path);

// Canonical JSON echo of the effective config (sorted keys, round-trip safe).
std::string config_json(const CliConfig& cfg);

// FNV-1a 64 over a string; config identities hash config_json output.
std::uint64_t fnv1a(const std::string& s);
std::string hash_hex(std::uint64_t h);

// Training config for one learned strategy kind, walk-forward period and
// seed, derived deterministically from the base config.
training::TrainConfig derive_train_config(const CliConfig& cfg, backtest::StrategyKind kind,
                                          int period, std::uint64_t seed);

// Directory of one training run's artifacts.
std::string train_run_dir(const CliConfig& cfg, const training::TrainConfig& tc);

// Subcommands. Return a process exit code: 0 success, 2 config/validation
// error, 3 runtime/data failure.
int cmd_fetch(const CliConfig& cfg);
int cmd_train(const CliConfig& cfg);
int cmd_backtest(const CliConfig& cfg);
int cmd_grid(const CliConfig& cfg);
int cmd_report(const CliConfig& cfg);

}  // namespace blvt::cli
