#pragma once

#include <string>
#include <vector>

#include "blvt/data/candle.hpp"

namespace blvt::data {

struct KlinesConfig {
  std::string base_url = "https://api.binance.com";
  std::string path = "/api/v3/klines";
  int page_limit = 1000;
  int max_retries = 5;
  int backoff_ms = 250;  // doubled after each retried attempt
  std::string cache_dir = "data";
  bool use_cache = true;
};

// Hourly candles for [start, end_exclusive), paginated and merged. A cache
// CSV under cache_dir/<symbol>_1h.csv is consulted first and updated after
// network fetches. Throws EmptyRangeError on an empty range, NetworkError
// when the endpoint stays unreachable, RateLimitError when HTTP 429/418
// persists through the retry budget, GapError when the merged result is
// missing interior hours.
std::vector<Candle> fetch_klines(const std::string& symbol, Timestamp start,
                                 Timestamp end_exclusive, const KlinesConfig& cfg = {});

}  // namespace blvt::data
