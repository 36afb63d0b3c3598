#include "blvt/cli/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include "blvt/data/candle.hpp"
#include "blvt/data/klines.hpp"
#include "blvt/errors.hpp"
#include "blvt/log.hpp"

namespace blvt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void CliConfig::validate() const {
  static const std::set<std::string> known{"BTCUSDT", "BTCUPUSDT", "BTCDOWNUSDT"};
  if (symbols.size() != 3)
    throw ConfigError("config: exactly three symbols required (base, up, down)");
  for (const auto& s : symbols)
    if (!known.count(s)) throw ConfigError("config: unknown symbol " + s);
  if (symbols[1].find("UP") == std::string::npos)
    throw ConfigError("config: second symbol must be the UP token");
  if (symbols[2].find("DOWN") == std::string::npos)
    throw ConfigError("config: third symbol must be the DOWN token");
  if (parse_utc(start) >= parse_utc(end)) throw ConfigError("config: start must precede end");
  train.validate();
  if (period < 1 || period > 3) throw ConfigError("config: period must be 1, 2 or 3");
  if (periods.empty()) throw ConfigError("config: empty period list");
  for (const int p : periods)
    if (p < 1 || p > 3) throw ConfigError("config: period must be 1, 2 or 3");
  if (strategies.empty()) throw ConfigError("config: empty strategy list");
  if (seeds.empty()) throw ConfigError("config: empty seed list");
  {
    const std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size()) throw SeedError("config: duplicate seeds");
  }
  if (max_configs < 0) throw ConfigError("config: max_configs must be non-negative");
}

namespace {

backtest::StrategyKind parse_strategy(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (name == "ns") return backtest::StrategyKind::NS;
  if (name == "svc1") return backtest::StrategyKind::SVC1;
  if (name == "svc2") return backtest::StrategyKind::SVC2;
  if (name == "nwp") return backtest::StrategyKind::NWP;
  if (name == "ewp") return backtest::StrategyKind::EWP;
  if (name == "gmvp") return backtest::StrategyKind::GMVP;
  if (name == "btc" || name == "btc_hold") return backtest::StrategyKind::BTC_HOLD;
  throw ConfigError("config: unknown strategy " + name);
}

const char* variant_name(losses::Variant v) {
  switch (v) {
    case losses::Variant::BASELINE: return "baseline";
    case losses::Variant::L1: return "l1";
    case losses::Variant::L2: return "l2";
  }
  return "?";
}

losses::Variant parse_variant(const std::string& s) {
  if (s == "baseline") return losses::Variant::BASELINE;
  if (s == "l1") return losses::Variant::L1;
  if (s == "l2") return losses::Variant::L2;
  throw ConfigError("config: unknown loss variant " + s);
}

const char* fees_name(training::FeeScheme s) {
  return s == training::FeeScheme::FEE ? "binance" : "none";
}

training::FeeScheme parse_fees(const std::string& s) {
  if (s == "none") return training::FeeScheme::NO_FEE;
  if (s == "binance" || s == "fee") return training::FeeScheme::FEE;
  throw ConfigError("config: unknown fee scheme " + s);
}

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("config: unknown key \"" + key + "\" in " + where);
}

json train_to_json(const training::TrainConfig& tc, bool with_seed) {
  json j;
  j["loss"] = variant_name(tc.loss.variant);
  j["gamma"] = tc.loss.gamma;
  j["xi"] = tc.loss.xi;
  j["batch_size"] = tc.batch_size;
  j["epochs"] = tc.epochs;
  j["lr"] = tc.base_lr;
  j["weight_decay"] = tc.weight_decay;
  j["fees"] = fees_name(tc.fee_scheme);
  if (with_seed) j["seed"] = tc.seed;
  j["T_seq"] = tc.T_seq;
  j["L"] = tc.L;
  j["K"] = tc.K;
  j["L_norm"] = tc.L_norm;
  j["hidden"] = tc.hidden;
  j["chunk_windows"] = tc.chunk_windows;
  if (tc.not_after != 0) j["not_after"] = format_utc(tc.not_after);
  return j;
}

void train_from_json(const json& j, training::TrainConfig& tc) {
  reject_unknown(j,
                 {"loss", "gamma", "xi", "batch_size", "epochs", "lr", "weight_decay", "fees",
                  "seed", "T_seq", "L", "K", "L_norm", "hidden", "chunk_windows"},
                 "train");
  if (j.contains("loss")) tc.loss.variant = parse_variant(j["loss"].get<std::string>());
  tc.loss.gamma = j.value("gamma", tc.loss.gamma);
  tc.loss.xi = j.value("xi", tc.loss.xi);
  tc.batch_size = j.value("batch_size", tc.batch_size);
  tc.epochs = j.value("epochs", tc.epochs);
  tc.base_lr = j.value("lr", tc.base_lr);
  tc.weight_decay = j.value("weight_decay", tc.weight_decay);
  if (j.contains("fees")) tc.fee_scheme = parse_fees(j["fees"].get<std::string>());
  tc.seed = j.value("seed", tc.seed);
  tc.T_seq = j.value("T_seq", tc.T_seq);
  tc.L = j.value("L", tc.L);
  tc.K = j.value("K", tc.K);
  tc.L_norm = j.value("L_norm", tc.L_norm);
  tc.hidden = j.value("hidden", tc.hidden);
  tc.chunk_windows = j.value("chunk_windows", tc.chunk_windows);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RangeError("cannot write " + path);
  out << content;
}

std::string now_utc() { return format_utc(static_cast<Timestamp>(std::time(nullptr))); }

void write_manifest(const std::string& dir, const std::string& command, const CliConfig& cfg,
                    const std::vector<std::string>& artifacts) {
  json j;
  j["command"] = command;
  j["tool"] = kToolVersion;
  j["created_utc"] = now_utc();
  j["config_hash"] = hash_hex(fnv1a(config_json(cfg)));
  j["config"] = json::parse(config_json(cfg));
  j["data_dir"] = cfg.data_dir;
  j["out_dir"] = cfg.out_dir;
  j["artifacts"] = artifacts;
  write_text(dir + "/manifest.json", j.dump(2) + "\n");
}

data::AlignedSeries load_aligned(const CliConfig& cfg) {
  std::array<std::vector<data::Candle>, 3> candles;
  for (int i = 0; i < 3; ++i) {
    const std::string path = cfg.data_dir + "/" + cfg.symbols[static_cast<std::size_t>(i)] +
                             "_1h.csv";
    if (!fs::exists(path))
      throw RangeError("data: missing " + path + " (run the fetch command first)");
    candles[static_cast<std::size_t>(i)] = data::ingest_csv(path);
  }
  return data::align(candles[0], candles[1], candles[2], cfg.gap_fill);
}

// Test slice widened to the left so the strategy's lookback is history, not
// traded span. The train half of the spec is irrelevant here.
data::AlignedSeries slice_for(const data::AlignedSeries& full, const data::SplitSpec& spec,
                              std::size_t lookback_rows) {
  data::SplitSpec s = spec;
  s.train_start = full.timestamps.front();
  s.train_end = full.timestamps.front();
  s.test_start = spec.test_start - static_cast<Timestamp>(lookback_rows) * kHour;
  return data::split(full, s).second;
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SeedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

CliConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  CliConfig cfg;
  reject_unknown(j,
                 {"data_dir", "out_dir", "symbols", "start", "end", "gap_fill", "base_url",
                  "train", "svc1", "svc2", "period", "periods", "strategies", "seeds", "grid",
                  "max_configs", "report_dir"},
                 "config");
  cfg.data_dir = j.value("data_dir", cfg.data_dir);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (j.contains("symbols")) cfg.symbols = j["symbols"].get<std::vector<std::string>>();
  cfg.start = j.value("start", cfg.start);
  cfg.end = j.value("end", cfg.end);
  cfg.gap_fill = j.value("gap_fill", cfg.gap_fill);
  cfg.base_url = j.value("base_url", cfg.base_url);
  if (j.contains("train")) train_from_json(j["train"], cfg.train);
  if (j.contains("svc1")) {
    reject_unknown(j["svc1"], {"gamma", "xi"}, "svc1");
    cfg.svc1_gamma = j["svc1"].value("gamma", cfg.svc1_gamma);
    cfg.svc1_xi = j["svc1"].value("xi", cfg.svc1_xi);
  }
  if (j.contains("svc2")) {
    reject_unknown(j["svc2"], {"gamma", "xi"}, "svc2");
    cfg.svc2_gamma = j["svc2"].value("gamma", cfg.svc2_gamma);
    cfg.svc2_xi = j["svc2"].value("xi", cfg.svc2_xi);
  }
  cfg.period = j.value("period", cfg.period);
  if (j.contains("periods")) cfg.periods = j["periods"].get<std::vector<int>>();
  if (j.contains("strategies")) cfg.strategies = j["strategies"].get<std::vector<std::string>>();
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    reject_unknown(g, {"batch_sizes", "epochs", "lrs", "weight_decays", "gammas", "xis"},
                   "grid");
    if (g.contains("batch_sizes")) cfg.grid_batch_sizes = g["batch_sizes"].get<std::vector<int>>();
    if (g.contains("epochs")) cfg.grid_epochs = g["epochs"].get<std::vector<int>>();
    if (g.contains("lrs")) cfg.grid_lrs = g["lrs"].get<std::vector<double>>();
    if (g.contains("weight_decays"))
      cfg.grid_weight_decays = g["weight_decays"].get<std::vector<double>>();
    if (g.contains("gammas")) cfg.grid_gammas = g["gammas"].get<std::vector<double>>();
    if (g.contains("xis")) cfg.grid_xis = g["xis"].get<std::vector<double>>();
  }
  cfg.max_configs = j.value("max_configs", cfg.max_configs);
  cfg.report_dir = j.value("report_dir", cfg.report_dir);
  return cfg;
}

std::string config_json(const CliConfig& cfg) {
  // Paths are deliberately absent: moving the data or output directories
  // must not change run identities.
  json j;
  j["symbols"] = cfg.symbols;
  j["start"] = cfg.start;
  j["end"] = cfg.end;
  j["gap_fill"] = cfg.gap_fill;
  j["base_url"] = cfg.base_url;
  j["train"] = train_to_json(cfg.train, true);
  j["svc1"] = {{"gamma", cfg.svc1_gamma}, {"xi", cfg.svc1_xi}};
  j["svc2"] = {{"gamma", cfg.svc2_gamma}, {"xi", cfg.svc2_xi}};
  j["period"] = cfg.period;
  j["periods"] = cfg.periods;
  j["strategies"] = cfg.strategies;
  j["seeds"] = cfg.seeds;
  j["grid"] = {{"batch_sizes", cfg.grid_batch_sizes}, {"epochs", cfg.grid_epochs},
               {"lrs", cfg.grid_lrs},                 {"weight_decays", cfg.grid_weight_decays},
               {"gammas", cfg.grid_gammas},           {"xis", cfg.grid_xis}};
  j["max_configs"] = cfg.max_configs;
  return j.dump();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

training::TrainConfig derive_train_config(const CliConfig& cfg, backtest::StrategyKind kind,
                                          int period, std::uint64_t seed) {
  if (period < 1 || period > 3) throw ConfigError("derive: period must be 1, 2 or 3");
  training::TrainConfig tc = cfg.train;
  tc.seed = seed;
  switch (kind) {
    case backtest::StrategyKind::NS:
      tc.loss.variant = losses::Variant::BASELINE;
      tc.loss.gamma = 0.0;
      tc.loss.xi = 0.0;
      break;
    case backtest::StrategyKind::SVC1:
      tc.loss.variant = losses::Variant::L1;
      tc.loss.gamma = cfg.svc1_gamma;
      tc.loss.xi = cfg.svc1_xi;
      break;
    case backtest::StrategyKind::SVC2:
      tc.loss.variant = losses::Variant::L2;
      tc.loss.gamma = cfg.svc2_gamma;
      tc.loss.xi = cfg.svc2_xi;
      break;
    default:
      throw ConfigError("derive: not a learned strategy");
  }
  tc.not_after = data::walk_forward_periods()[static_cast<std::size_t>(period - 1)].train_end;
  return tc;
}

namespace {

// Run identity: everything that shapes a checkpoint except the seed, which
// is the directory level below.
std::string run_identity_json(const CliConfig& cfg, const training::TrainConfig& tc) {
  json j;
  j["symbols"] = cfg.symbols;
  j["start"] = cfg.start;
  j["end"] = cfg.end;
  j["gap_fill"] = cfg.gap_fill;
  j["train"] = train_to_json(tc, false);
  return j.dump();
}

}  // namespace

std::string train_run_dir(const CliConfig& cfg, const training::TrainConfig& tc) {
  return cfg.out_dir + "/train/" + hash_hex(fnv1a(run_identity_json(cfg, tc))) + "/" +
         std::to_string(tc.seed);
}

int cmd_fetch(const CliConfig& cfg) {
  return guarded([&] {
    cfg.validate();
    data::KlinesConfig kc;
    kc.base_url = cfg.base_url;
    kc.cache_dir = cfg.data_dir;
    const Timestamp t0 = parse_utc(cfg.start);
    const Timestamp t1 = parse_utc(cfg.end) + kHour;  // end is an inclusive open_time
    fs::create_directories(cfg.data_dir);
    std::vector<std::string> artifacts;
    for (const auto& sym : cfg.symbols) {
      const auto rows = data::fetch_klines(sym, t0, t1, kc);
      std::cout << sym << ": " << rows.size() << " rows\n";
      artifacts.push_back(cfg.data_dir + "/" + sym + "_1h.csv");
    }
    write_manifest(cfg.data_dir, "fetch", cfg, artifacts);
  });
}

int cmd_train(const CliConfig& cfg) {
  return guarded([&] {
    cfg.validate();
    const auto spec =
        data::walk_forward_periods()[static_cast<std::size_t>(cfg.period - 1)];
    training::TrainConfig tc = cfg.train;
    tc.not_after = spec.train_end;
    const auto full = load_aligned(cfg);
    const auto [train_slice, test_slice] = data::split(full, spec);
    const auto res = training::train(train_slice, tc);

    const std::string dir = train_run_dir(cfg, tc);
    fs::create_directories(dir);
    nn::save_checkpoint(dir + "/checkpoint.bin", res.params, tc.seed);
    std::string losses_csv = "epoch,loss\n";
    for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) {
      char line[64];
      std::snprintf(line, sizeof line, "%zu,%.17g\n", e, res.epoch_loss[e]);
      losses_csv += line;
    }
    write_text(dir + "/losses.csv", losses_csv);
    write_text(dir + "/config.json",
               json::parse(run_identity_json(cfg, tc)).dump(2) + "\n");
    write_manifest(dir, "train", cfg,
                   {dir + "/checkpoint.bin", dir + "/losses.csv", dir + "/config.json"});
    std::cout << "trained " << variant_name(tc.loss.variant) << " seed " << tc.seed
              << " period " << cfg.period << ": final epoch loss "
              << res.epoch_loss.back() << ", " << res.wall_seconds << " s\n"
              << "artifacts: " << dir << "\n";
  });
}

namespace {

backtest::BacktestReport run_one(const data::AlignedSeries& full,
                                 const backtest::Strategy& strategy, int period,
                                 training::FeeScheme scheme) {
  const auto spec = data::walk_forward_periods()[static_cast<std::size_t>(period - 1)];
  const auto fees = scheme == training::FeeScheme::FEE ? portfolio::FeeSchedule::binance()
                                                       : portfolio::FeeSchedule::none();
  const auto slice = slice_for(full, spec, strategy.lookback_rows());
  auto rep = backtest::run_backtest(strategy, slice, fees, spec.test_start);
  rep.period = "P" + std::to_string(period);
  return rep;
}

}  // namespace

int cmd_backtest(const CliConfig& cfg) {
  return guarded([&] {
    cfg.validate();
    const auto full = load_aligned(cfg);
    std::vector<backtest::BacktestReport> reports;
    // Checkpoints are loaded once per (kind, period, seed) and must outlive
    // the strategy pointing at them.
    std::vector<std::unique_ptr<nn::Checkpoint>> checkpoints;

    for (const auto& name : cfg.strategies) {
      const auto kind = parse_strategy(name);
      const bool learned = kind == backtest::StrategyKind::NS ||
                           kind == backtest::StrategyKind::SVC1 ||
                           kind == backtest::StrategyKind::SVC2;
      for (const int period : cfg.periods) {
        if (learned) {
          for (const auto seed : cfg.seeds) {
            const auto tc = derive_train_config(cfg, kind, period, seed);
            const std::string path = train_run_dir(cfg, tc) + "/checkpoint.bin";
            if (!fs::exists(path))
              throw MissingCellError("backtest: missing checkpoint " + path);
            checkpoints.push_back(std::make_unique<nn::Checkpoint>(nn::load_checkpoint(path)));
            backtest::Strategy s;
            s.kind = kind;
            s.params = &checkpoints.back()->params;
            s.config = tc;
            s.window = tc.K;
            for (const auto scheme : {training::FeeScheme::NO_FEE, training::FeeScheme::FEE}) {
              auto rep = run_one(full, s, period, scheme);
              rep.seed = seed;
              rep.config_hash = fnv1a(run_identity_json(cfg, tc));
              reports.push_back(std::move(rep));
            }
          }
        } else {
          backtest::Strategy s;
          s.kind = kind;
          s.window = cfg.train.K;
          for (const auto scheme : {training::FeeScheme::NO_FEE, training::FeeScheme::FEE})
            reports.push_back(run_one(full, s, period, scheme));
        }
      }
    }

    const std::string dir =
        cfg.out_dir + "/backtest/" + hash_hex(fnv1a(config_json(cfg)));
    fs::create_directories(dir + "/reports");
    std::vector<std::string> artifacts;
    for (const auto& r : reports) {
      const std::string path = dir + "/reports/" + backtest::scheme_name(r.scheme) + "_" +
                               backtest::strategy_name(r.strategy) + "_" + r.period + "_s" +
                               std::to_string(r.seed) + ".json";
      write_text(path, backtest::report_json(r) + "\n");
      artifacts.push_back(path);
    }
    const auto table = backtest::report_table(reports);
    write_text(dir + "/summary.txt", table.text);
    write_text(dir + "/summary.csv", table.csv);
    artifacts.push_back(dir + "/summary.txt");
    artifacts.push_back(dir + "/summary.csv");
    write_manifest(dir, "backtest", cfg, artifacts);
    std::cout << table.text << "artifacts: " << dir << "\n";
  });
}

int cmd_grid(const CliConfig& cfg) {
  return guarded([&] {
    cfg.validate();

    const auto batch_sizes =
        cfg.grid_batch_sizes.empty() ? std::vector<int>{cfg.train.batch_size} : cfg.grid_batch_sizes;
    const auto epochs_axis =
        cfg.grid_epochs.empty() ? std::vector<int>{cfg.train.epochs} : cfg.grid_epochs;
    const auto lrs = cfg.grid_lrs.empty() ? std::vector<double>{cfg.train.base_lr} : cfg.grid_lrs;
    const auto wds = cfg.grid_weight_decays.empty() ? std::vector<double>{cfg.train.weight_decay}
                                                    : cfg.grid_weight_decays;
    const bool constrained = cfg.train.loss.variant != losses::Variant::BASELINE;
    const auto gammas = !constrained ? std::vector<double>{cfg.train.loss.gamma}
                        : cfg.grid_gammas.empty() ? std::vector<double>{cfg.train.loss.gamma}
                                                  : cfg.grid_gammas;
    const auto xis = !constrained                ? std::vector<double>{cfg.train.loss.xi}
                     : cfg.grid_xis.empty()      ? std::vector<double>{cfg.train.loss.xi}
                                                 : cfg.grid_xis;

    std::vector<training::TrainConfig> configs;
    for (const int bs : batch_sizes)
      for (const int ep : epochs_axis)
        for (const double lr : lrs)
          for (const double wd : wds)
            for (const double ga : gammas)
              for (const double xi : xis) {
                training::TrainConfig tc = cfg.train;
                tc.batch_size = bs;
                tc.epochs = ep;
                tc.base_lr = lr;
                tc.weight_decay = wd;
                tc.loss.gamma = ga;
                tc.loss.xi = xi;
                tc.validate();
                configs.push_back(tc);
              }
    if (cfg.max_configs > 0 && configs.size() > static_cast<std::size_t>(cfg.max_configs))
      configs.resize(static_cast<std::size_t>(cfg.max_configs));

    const auto full = load_aligned(cfg);
    const auto all_periods = data::walk_forward_periods();

    struct Row {
      training::TrainConfig config;
      double mean = 0.0, stdev = 0.0;
      int failed = 0;
    };
    std::vector<Row> rows;

    const auto kind = cfg.train.loss.variant == losses::Variant::BASELINE
                          ? backtest::StrategyKind::NS
                      : cfg.train.loss.variant == losses::Variant::L1
                          ? backtest::StrategyKind::SVC1
                          : backtest::StrategyKind::SVC2;

    for (const auto& base : configs) {
      Row row;
      row.config = base;
      std::vector<double> per_seed;
      for (const auto seed : cfg.seeds) {
        double sum = 0.0;
        bool ok = true;
        for (const int period : cfg.periods) {
          const auto spec = all_periods[static_cast<std::size_t>(period - 1)];
          training::TrainConfig tc = base;
          tc.seed = seed;
          tc.not_after = spec.train_end;
          const std::string dir = train_run_dir(cfg, tc);
          const std::string metrics_path = dir + "/metrics.json";
          try {
            double sharpe;
            if (fs::exists(metrics_path) && fs::exists(dir + "/checkpoint.bin")) {
              sharpe = json::parse(read_file(metrics_path))["sharpe"].get<double>();
            } else {
              const auto train_slice = data::split(full, spec).first;
              const auto res = training::train(train_slice, tc);
              backtest::Strategy s;
              s.kind = kind;
              s.params = &res.params;
              s.config = tc;
              s.window = tc.K;
              const auto rep = run_one(full, s, period, tc.fee_scheme);
              fs::create_directories(dir);
              nn::save_checkpoint(dir + "/checkpoint.bin", res.params, seed);
              json mj;
              mj["sharpe"] = rep.metrics.sharpe;
              mj["fapv"] = rep.metrics.fapv;
              mj["mdd"] = rep.metrics.mdd;
              mj["wall_seconds"] = res.wall_seconds;
              write_text(metrics_path, mj.dump(2) + "\n");
              write_text(dir + "/config.json",
                         json::parse(run_identity_json(cfg, tc)).dump(2) + "\n");
              sharpe = rep.metrics.sharpe;
            }
            sum += sharpe;
          } catch (const Error& e) {
            log::warn(std::string("grid: run failed (seed ") + std::to_string(seed) +
                      ", period " + std::to_string(period) + "): " + e.what());
            ok = false;
            break;
          }
        }
        if (ok) per_seed.push_back(sum / static_cast<double>(cfg.periods.size()));
        else ++row.failed;
      }
      if (per_seed.empty()) {
        row.mean = -std::numeric_limits<double>::infinity();
      } else {
        for (const double s : per_seed) row.mean += s;
        row.mean /= static_cast<double>(per_seed.size());
        if (per_seed.size() > 1) {
          double ssq = 0.0;
          for (const double s : per_seed) ssq += (s - row.mean) * (s - row.mean);
          row.stdev = std::sqrt(ssq / static_cast<double>(per_seed.size() - 1));
        }
      }
      rows.push_back(std::move(row));
    }

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.mean > b.mean; });

    std::string csv =
        "rank,loss,gamma,xi,batch_size,epochs,lr,weight_decay,fees,mean_sharpe,std_sharpe,"
        "failed\n";
    std::string text = "grid results (best first):\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      char line[512];
      std::snprintf(line, sizeof line, "%zu,%s,%g,%g,%d,%d,%g,%g,%s,%.6f,%.6f,%d\n", i + 1,
                    variant_name(r.config.loss.variant), r.config.loss.gamma, r.config.loss.xi,
                    r.config.batch_size, r.config.epochs, r.config.base_lr,
                    r.config.weight_decay, fees_name(r.config.fee_scheme), r.mean, r.stdev,
                    r.failed);
      csv += line;
      std::snprintf(line, sizeof line,
                    "  #%zu %s bs=%d ep=%d lr=%g wd=%g gamma=%g xi=%g -> %.4f +- %.4f (%d "
                    "failed)\n",
                    i + 1, variant_name(r.config.loss.variant), r.config.batch_size,
                    r.config.epochs, r.config.base_lr, r.config.weight_decay,
                    r.config.loss.gamma, r.config.loss.xi, r.mean, r.stdev, r.failed);
      text += line;
    }

    const std::string dir = cfg.out_dir + "/grid/" + hash_hex(fnv1a(config_json(cfg)));
    fs::create_directories(dir);
    write_text(dir + "/summary.csv", csv);
    write_text(dir + "/summary.txt", text);
    write_manifest(dir, "grid", cfg, {dir + "/summary.csv", dir + "/summary.txt"});
    std::cout << text << "artifacts: " << dir << "\n";
  });
}

int cmd_report(const CliConfig& cfg) {
  return guarded([&] {
    std::string dir = cfg.report_dir;
    if (dir.empty()) {
      const std::string root = cfg.out_dir + "/backtest";
      if (!fs::exists(root)) throw ConfigError("report: no backtest runs under " + root);
      fs::file_time_type best{};
      for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        if (dir.empty() || entry.last_write_time() > best) {
          best = entry.last_write_time();
          dir = entry.path().string();
        }
      }
      if (dir.empty()) throw ConfigError("report: no backtest runs under " + root);
    }
    const std::string reports_dir = dir + "/reports";
    if (!fs::exists(reports_dir)) throw ConfigError("report: missing " + reports_dir);

    std::vector<backtest::BacktestReport> reports;
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(reports_dir))
      if (entry.path().extension() == ".json") paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    for (const auto& path : paths) {
      const auto j = json::parse(read_file(path));
      backtest::BacktestReport r;
      r.strategy = parse_strategy(j["strategy"].get<std::string>());
      r.period = j["period"].get<std::string>();
      r.scheme = j["fee_scheme"].get<std::string>() == "fee" ? training::FeeScheme::FEE
                                                             : training::FeeScheme::NO_FEE;
      r.seed = j["seed"].get<std::uint64_t>();
      r.config_hash = j["config_hash"].get<std::uint64_t>();
      r.metrics.sharpe = j["sharpe"].get<double>();
      r.metrics.fapv = j["fapv"].get<double>();
      r.metrics.mdd = j["mdd"].get<double>();
      reports.push_back(std::move(r));
    }
    if (reports.empty()) throw MissingCellError("report: no report files in " + reports_dir);

    const auto table = backtest::report_table(reports);
    write_text(dir + "/summary.txt", table.text);
    write_text(dir + "/summary.csv", table.csv);
    std::cout << table.text;
  });
}

}  // namespace blvt::cli
