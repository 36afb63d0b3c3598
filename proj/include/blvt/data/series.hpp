#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "blvt/data/candle.hpp"

namespace blvt::data {

enum class Ticker : int { BTC = 0, UP = 1, DOWN = 2 };
inline constexpr int kTickers = 3;

struct TickerColumns {
  std::vector<double> open, high, low, close, volume;
  // returns[k] = close[k+1]/close[k] - 1, length n-1
  std::vector<double> returns;
};

// The three tickers on one strictly increasing 1-hour grid.
struct AlignedSeries {
  std::vector<Timestamp> timestamps;
  std::array<TickerColumns, kTickers> tickers;
  bool gap_filled = false;   // forward-fill was applied somewhere
  std::size_t filled_hours = 0;

  std::size_t size() const { return timestamps.size(); }
  const TickerColumns& at(Ticker t) const { return tickers[static_cast<int>(t)]; }

  // Index of the given open_time; throws RangeError when absent.
  std::size_t index_of(Timestamp t) const;
};

// Intersects the three timestamp grids, verifies 1-hour spacing and computes
// returns. Interior gaps throw GapError unless gap_fill is set, in which
// case missing hours are forward-filled (flat candle, zero volume) and the
// event is recorded on the result.
AlignedSeries align(const std::vector<Candle>& btc, const std::vector<Candle>& up,
                    const std::vector<Candle>& down, bool gap_fill = false);

struct SplitSpec {
  Timestamp train_start = 0;
  Timestamp train_end = 0;  // inclusive open_time
  Timestamp test_start = 0;
  Timestamp test_end = 0;   // inclusive open_time
};

// Inclusive-slice walk-forward split. Throws RangeError when the spec is
// inverted or falls outside the dataset.
std::pair<AlignedSeries, AlignedSeries> split(const AlignedSeries& aligned,
                                              const SplitSpec& spec);

// The three walk-forward evaluation periods used throughout. Training always
// starts 2020-05-15 00:00 UTC; each test span covers two months of hourly
// closes ending at 23:00 of its last day.
std::vector<SplitSpec> walk_forward_periods();

}  // namespace blvt::data
