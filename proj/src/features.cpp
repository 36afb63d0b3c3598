#include "blvt/data/features.hpp"

#include <cmath>
#include <limits>

#include "blvt/errors.hpp"
#include "blvt/log.hpp"

namespace blvt::data {

std::vector<double> rolling_zscore(std::span<const double> series, int L_norm) {
  if (L_norm < 1) throw RangeError("rolling_zscore: block length must be positive");
  const std::size_t n = series.size();
  const auto block = static_cast<std::size_t>(L_norm);
  if (n < 2 * block)
    throw LengthError("rolling_zscore: series shorter than two normalization blocks");

  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t start = block; start < n; start += block) {
    // Statistics of the preceding full block.
    double mean = 0.0;
    for (std::size_t i = start - block; i < start; ++i) mean += series[i];
    mean /= static_cast<double>(block);
    double var = 0.0;
    for (std::size_t i = start - block; i < start; ++i) {
      const double d = series[i] - mean;
      var += d * d;
    }
    double sd = std::sqrt(var / static_cast<double>(block));
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      log::warn("rolling_zscore: zero-variance block before index " + std::to_string(start) +
                ", using epsilon std");
      sd = 1e-8;
    }
    const std::size_t end = std::min(start + block, n);
    for (std::size_t i = start; i < end; ++i) out[i] = (series[i] - mean) / sd;
  }
  return out;
}

FeaturePipeline::FeaturePipeline(const AlignedSeries& aligned, int L, int L_norm)
    : L_(L), L_norm_(L_norm), timestamps_(aligned.timestamps) {
  if (L < 1) throw RangeError("feature pipeline: lookback must be positive");
  const std::size_t n = aligned.size();
  if (n < 2 * static_cast<std::size_t>(L_norm) + 1)
    throw LengthError("feature pipeline: series too short for normalization");

  matrix_.assign(n * static_cast<std::size_t>(kFeatureCols),
                 std::numeric_limits<double>::quiet_NaN());
  const auto put = [&](std::size_t row, int col, double v) {
    matrix_[row * static_cast<std::size_t>(kFeatureCols) + static_cast<std::size_t>(col)] = v;
  };

  for (int k = 0; k < kTickers; ++k) {
    const auto& tc = aligned.tickers[static_cast<std::size_t>(k)];
    const std::array<const std::vector<double>*, 5> price_cols{&tc.open, &tc.high, &tc.low,
                                                               &tc.close, &tc.volume};
    for (int ch = 0; ch < 5; ++ch) {
      const auto z = rolling_zscore(*price_cols[static_cast<std::size_t>(ch)], L_norm);
      for (std::size_t r = 0; r < n; ++r) put(r, k * kChannels + ch, z[r]);
    }
    // returns[r-1] belongs to row r; blocks anchored at row 1
    const auto zr = rolling_zscore(tc.returns, L_norm);
    for (std::size_t r = 1; r < n; ++r) put(r, k * kChannels + 5, zr[r - 1]);
  }
}

FeatureWindow FeaturePipeline::window(std::size_t anchor_index) const {
  if (anchor_index >= rows()) throw RangeError("feature window: anchor beyond series");
  if (anchor_index < first_usable_anchor())
    throw InsufficientHistoryError("feature window: anchor " + format_utc(timestamps_[anchor_index]) +
                                   " lacks normalized history");
  FeatureWindow w;
  w.rows = L_;
  w.anchor_time = timestamps_[anchor_index];
  const std::size_t begin = (anchor_index - static_cast<std::size_t>(L_) + 1) *
                            static_cast<std::size_t>(kFeatureCols);
  const std::size_t end = (anchor_index + 1) * static_cast<std::size_t>(kFeatureCols);
  w.values.assign(matrix_.begin() + static_cast<std::ptrdiff_t>(begin),
                  matrix_.begin() + static_cast<std::ptrdiff_t>(end));
  return w;
}

FeatureWindow build_features(const AlignedSeries& aligned, Timestamp t, int L, int L_norm) {
  const FeaturePipeline pipe(aligned, L, L_norm);
  return pipe.window(aligned.index_of(t));
}

}  // namespace blvt::data
