#pragma once

#include <span>
#include <vector>

#include "blvt/data/series.hpp"

namespace blvt::data {

inline constexpr int kChannels = 6;                        // O,H,L,C,V,return
inline constexpr int kFeatureCols = kTickers * kChannels;  // 18

// L x 18 row-major matrix anchored at the decision point. Row L-1 is the
// candle carrying anchor_time as its open_time (the decision trades on that
// candle's close); rows above it are the preceding hours, oldest first.
// Columns: ticker-major [BTC, BTCUP, BTCDOWN] x [O,H,L,C,V,return].
struct FeatureWindow {
  std::vector<double> values;
  int rows = 0;
  Timestamp anchor_time = 0;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * kFeatureCols + c]; }
};

// Forward block z-score. The series is cut into consecutive blocks of
// L_norm entries; mean and population std of block k normalize block k+1.
// The first block has no predecessor and is emitted as NaN. A block whose
// std vanishes (relative threshold 1e-12) lends std = 1e-8 instead, and the
// event is logged. Throws LengthError when the series is shorter than
// 2*L_norm.
std::vector<double> rolling_zscore(std::span<const double> series, int L_norm);

// Precomputes the normalized n x 18 feature matrix of an aligned series so
// window extraction is a row slice. Return channels live at row r >= 1
// (returns[r-1]) and their normalization blocks are anchored at row 1.
class FeaturePipeline {
 public:
  FeaturePipeline(const AlignedSeries& aligned, int L, int L_norm);

  int lookback() const { return L_; }
  int norm_block() const { return L_norm_; }
  std::size_t rows() const { return timestamps_.size(); }

  // First row whose 18 channels are all normalized: L_norm + 1.
  std::size_t first_normalized_row() const { return static_cast<std::size_t>(L_norm_) + 1; }
  // Smallest anchor index with a full window of normalized rows: L + L_norm.
  std::size_t first_usable_anchor() const {
    return static_cast<std::size_t>(L_) + static_cast<std::size_t>(L_norm_);
  }

  // Window of rows [anchor-L+1, anchor]. Throws InsufficientHistoryError
  // when the window would include unnormalized rows.
  FeatureWindow window(std::size_t anchor_index) const;

  // Normalized entry at (row, col); NaN on the excluded prefix.
  double at(std::size_t row, int col) const {
    return matrix_[row * static_cast<std::size_t>(kFeatureCols) + static_cast<std::size_t>(col)];
  }
  Timestamp time_at(std::size_t row) const { return timestamps_[row]; }

 private:
  int L_;
  int L_norm_;
  std::vector<Timestamp> timestamps_;
  std::vector<double> matrix_;  // rows x 18, row-major
};

// One-shot convenience wrapper over FeaturePipeline.
FeatureWindow build_features(const AlignedSeries& aligned, Timestamp t, int L, int L_norm = 12);

}  // namespace blvt::data
