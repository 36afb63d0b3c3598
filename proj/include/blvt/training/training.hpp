#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "blvt/data/features.hpp"
#include "blvt/data/series.hpp"
#include "blvt/losses/losses.hpp"
#include "blvt/metrics/metrics.hpp"
#include "blvt/nn/autodiff.hpp"
#include "blvt/nn/model.hpp"
#include "blvt/portfolio/portfolio.hpp"

namespace blvt::training {

enum class FeeScheme { NO_FEE, FEE };

// Default hyperparameter search grids.
namespace grids {
inline constexpr std::array<int, 4> kBatchSizes{64, 128, 256, 512};
inline constexpr std::array<int, 4> kEpochs{80, 100, 120, 140};
inline constexpr std::array<double, 7> kLearningRates{1e-5, 3e-5, 5e-5, 1e-4, 3e-4, 5e-4, 1e-3};
inline constexpr std::array<double, 5> kWeightDecays{0.0, 1e-4, 3e-4, 5e-4, 1e-3};
inline constexpr std::array<double, 11> kGammas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                                0.6, 0.7, 0.8, 0.9, 1.0};
inline constexpr std::array<double, 10> kXis{1e-6, 3e-6, 5e-6, 1e-5, 3e-5,
                                             5e-5, 1e-4, 3e-4, 5e-4, 1e-3};
}  // namespace grids

struct TrainConfig {
  losses::LossConfig loss;
  int batch_size = 128;
  int epochs = 100;
  double base_lr = 1e-4;
  double weight_decay = 0.0;
  FeeScheme fee_scheme = FeeScheme::NO_FEE;
  std::uint64_t seed = 1;
  int T_seq = 32;  // decision points per trajectory segment
  int L = 48;      // lookback window
  int K = 48;      // beta estimation window
  int L_norm = 12;
  int hidden = 64;
  // Largest number of LSTM rows (T_seq * segments) evaluated on one tape;
  // batches above this are split into gradient-accumulation chunks.
  int chunk_windows = 512;
  // When set, prepare_training refuses series extending past this open_time
  // (walk-forward leak guard).
  Timestamp not_after = 0;

  portfolio::FeeSchedule fees() const;
  void validate() const;  // ConfigError on out-of-range values
};

// Per-row market data shared by all stride-1 segments. Segment s covers
// decision anchors first_anchor+s .. first_anchor+s+T-1 plus one horizon
// row.
struct TrainingView {
  explicit TrainingView(data::FeaturePipeline f) : features(std::move(f)) {}

  data::FeaturePipeline features;
  std::vector<Timestamp> timestamps;
  std::vector<double> y_u, y_d;       // close prices per row
  std::vector<double> rel_u, rel_d;   // close[i+1]/close[i], length rows-1
  std::vector<double> mgmt;           // management factor row i -> i+1 (FEE scheme)
  std::vector<double> beta_hat;       // trailing-K OLS slope per row (NaN early)
  std::size_t first_anchor = 0;
  std::size_t n_segments = 0;
  int T = 0;
  int L = 0;
  double fee_c = 0.0;

  std::size_t anchor(std::size_t seg, int t) const {
    return first_anchor + seg + static_cast<std::size_t>(t);
  }
};

TrainingView prepare_training(const data::AlignedSeries& train, const TrainConfig& cfg);

// Plain-double simulation of one segment under the given parameters,
// mirroring the taped computation operation for operation.
losses::TrajectoryBatch simulate_segment(const TrainingView& view, std::size_t seg,
                                         const nn::ModelParams& params, const TrainConfig& cfg);

// All stride-1 segments materialized as TrajectoryBatches. The model
// parameters are required because weights, volumes and returns depend on
// the allocator's outputs.
std::vector<losses::TrajectoryBatch> make_trajectories(const data::AlignedSeries& train,
                                                       const TrainConfig& cfg,
                                                       const nn::ModelParams& params);

// Full taped loss for a set of segments. seg_loss is (B,1), one combined
// loss per segment; mean_loss is its scalar mean.
struct BatchGraph {
  nn::TapeModel model;
  nn::Tape::Id seg_loss = -1;
  nn::Tape::Id mean_loss = -1;
};

BatchGraph build_batch_graph(nn::Tape& tape, const TrainingView& view,
                             const nn::ModelParams& params,
                             std::span<const std::size_t> segments, const TrainConfig& cfg);

struct RunResult {
  nn::ModelParams params;
  std::vector<double> epoch_loss;
  std::vector<metrics::MetricsRow> test_metrics;  // filled by the evaluator
  TrainConfig config;
  double wall_seconds = 0.0;
};

// Deterministic given (data, cfg): shuffled batches, cosine-annealed AdamW
// over epochs*batches steps. Throws DivergenceError naming the offending
// epoch/batch when the loss turns non-finite.
RunResult train(const data::AlignedSeries& train_data, const TrainConfig& cfg);

// Evaluates a trained model on one walk-forward period's test span.
using PeriodEvaluator =
    std::function<metrics::MetricsRow(const nn::ModelParams&, const TrainConfig&, std::size_t)>;

struct GridEntry {
  TrainConfig config;
  double mean_sharpe = 0.0;  // across seeds of each seed's period-average test Sharpe
  double std_sharpe = 0.0;   // sample std across seeds
  int failed_runs = 0;
  std::vector<RunResult> runs;  // seed-major, period-minor
};

// For every config and seed: train per period (walk-forward) and collect
// test metrics through the evaluator. Entries come back sorted by
// mean_sharpe, best first. Throws SeedError on duplicate seeds, ConfigError
// on an empty grid. Failed runs are counted per entry, not fatal.
std::vector<GridEntry> grid_search(const data::AlignedSeries& full,
                                   std::span<const data::SplitSpec> periods,
                                   std::span<const TrainConfig> configs,
                                   std::span<const std::uint64_t> seeds,
                                   const PeriodEvaluator& evaluate);

}  // namespace blvt::training
