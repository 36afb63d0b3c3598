#pragma once

#include <string>
#include <vector>

#include "blvt/timeutil.hpp"

namespace blvt::data {

struct Candle {
  Timestamp open_time = 0;  // start of the hour, UTC
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;
};

// Throws RangeError when OHLC ordering or positivity is violated.
void validate_candle(const Candle& c);

// CSV with header `open_time,open,high,low,close,volume`, ISO-8601 UTC
// timestamps. Result is validated and strictly increasing in open_time.
std::vector<Candle> ingest_csv(const std::string& path);

// Inverse of ingest_csv; prices written with 17 significant digits so a
// round-trip is bit-exact.
void write_csv(const std::string& path, const std::vector<Candle>& candles);

}  // namespace blvt::data
