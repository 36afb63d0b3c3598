#include "blvt/data/klines.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "blvt/errors.hpp"
#include "blvt/log.hpp"

namespace blvt::data {

namespace {

std::string cache_path(const KlinesConfig& cfg, const std::string& symbol) {
  return cfg.cache_dir + "/" + symbol + "_1h.csv";
}

double json_number(const nlohmann::json& v, const char* name) {
  if (v.is_string()) {
    try {
      return std::stod(v.get<std::string>());
    } catch (const std::exception&) {
      throw ParseError(std::string("klines: bad numeric string for ") + name);
    }
  }
  if (v.is_number()) return v.get<double>();
  throw ParseError(std::string("klines: unexpected JSON type for ") + name);
}

std::vector<Candle> parse_klines_body(const std::string& body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("klines: invalid JSON response: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("klines: response is not an array");
  std::vector<Candle> out;
  out.reserve(doc.size());
  for (const auto& row : doc) {
    if (!row.is_array() || row.size() < 6)
      throw ParseError("klines: row with fewer than 6 fields");
    Candle c;
    c.open_time = row[0].get<std::int64_t>() / 1000;
    c.open = json_number(row[1], "open");
    c.high = json_number(row[2], "high");
    c.low = json_number(row[3], "low");
    c.close = json_number(row[4], "close");
    c.volume = json_number(row[5], "volume");
    validate_candle(c);
    out.push_back(c);
  }
  return out;
}

// One GET with retry on transport failures and HTTP 429/418.
std::string get_with_retry(httplib::Client& cli, const std::string& path,
                           const httplib::Params& params, const KlinesConfig& cfg) {
  int backoff = cfg.backoff_ms;
  for (int attempt = 0;; ++attempt) {
    auto res = cli.Get(path, params, httplib::Headers{});
    if (res) {
      if (res->status == 200) return res->body;
      if (res->status == 429 || res->status == 418) {
        if (attempt >= cfg.max_retries)
          throw RateLimitError("klines: rate limited after " + std::to_string(attempt + 1) +
                               " attempts");
        log::warn("klines: HTTP " + std::to_string(res->status) + ", backing off " +
                  std::to_string(backoff) + "ms");
      } else {
        throw NetworkError("klines: HTTP status " + std::to_string(res->status));
      }
    } else {
      if (attempt >= cfg.max_retries)
        throw NetworkError("klines: transport failure: " + httplib::to_string(res.error()));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    backoff *= 2;
  }
}

std::vector<Candle> fetch_range(const std::string& symbol, Timestamp start, Timestamp end,
                                const KlinesConfig& cfg) {
  httplib::Client cli(cfg.base_url);
  cli.set_connection_timeout(10);
  cli.set_read_timeout(30);

  std::vector<Candle> out;
  Timestamp cursor = start;
  while (cursor < end) {
    httplib::Params params{
        {"symbol", symbol},
        {"interval", "1h"},
        {"startTime", std::to_string(cursor * 1000)},
        {"endTime", std::to_string(end * 1000 - 1)},
        {"limit", std::to_string(cfg.page_limit)},
    };
    const auto page = parse_klines_body(get_with_retry(cli, cfg.path, params, cfg));
    if (page.empty()) break;
    Timestamp last = cursor - 1;
    for (const auto& c : page) {
      if (c.open_time < cursor || c.open_time >= end) continue;
      if (!out.empty() && c.open_time <= out.back().open_time)
        throw OrderError("klines: server returned non-increasing timestamps");
      out.push_back(c);
      last = c.open_time;
    }
    const Timestamp next = last + kHour;
    if (next <= cursor)
      throw NetworkError("klines: pagination made no progress at " + format_utc(cursor));
    cursor = next;
  }
  return out;
}

std::vector<Timestamp> missing_hours(const std::vector<Candle>& candles, Timestamp start,
                                     Timestamp end) {
  std::vector<Timestamp> missing;
  std::size_t i = 0;
  for (Timestamp t = start; t < end; t += kHour) {
    while (i < candles.size() && candles[i].open_time < t) ++i;
    if (i >= candles.size() || candles[i].open_time != t) missing.push_back(t);
  }
  return missing;
}

[[noreturn]] void throw_gap(const std::vector<Timestamp>& missing, const std::string& symbol) {
  std::string msg =
      "klines: " + symbol + " missing " + std::to_string(missing.size()) + " hour(s):";
  const std::size_t shown = std::min<std::size_t>(missing.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) msg += " " + format_utc(missing[i]);
  if (missing.size() > shown) msg += " and " + std::to_string(missing.size() - shown) + " more";
  throw GapError(msg);
}

}  // namespace

std::vector<Candle> fetch_klines(const std::string& symbol, Timestamp start,
                                 Timestamp end_exclusive, const KlinesConfig& cfg) {
  if (!(start < end_exclusive)) throw EmptyRangeError("klines: empty time range");
  if (start % kHour != 0 || end_exclusive % kHour != 0)
    throw RangeError("klines: range boundaries must be hour-aligned");

  std::vector<Candle> cached;
  const std::string cpath = cache_path(cfg, symbol);
  if (cfg.use_cache && std::filesystem::exists(cpath)) cached = ingest_csv(cpath);

  const auto slice = [&](const std::vector<Candle>& all) {
    std::vector<Candle> s;
    for (const auto& c : all)
      if (c.open_time >= start && c.open_time < end_exclusive) s.push_back(c);
    return s;
  };

  if (cfg.use_cache && !cached.empty()) {
    auto s = slice(cached);
    if (missing_hours(s, start, end_exclusive).empty()) return s;
  }

  const auto fetched = fetch_range(symbol, start, end_exclusive, cfg);

  if (cfg.use_cache) {
    std::map<Timestamp, Candle> merged;
    for (const auto& c : cached) merged[c.open_time] = c;
    for (const auto& c : fetched) merged[c.open_time] = c;
    std::vector<Candle> all;
    all.reserve(merged.size());
    for (const auto& [_, c] : merged) all.push_back(c);
    std::filesystem::create_directories(cfg.cache_dir);
    write_csv(cpath, all);
    cached = std::move(all);
  } else {
    cached = fetched;
  }

  auto s = slice(cached);
  const auto missing = missing_hours(s, start, end_exclusive);
  if (!missing.empty()) throw_gap(missing, symbol);
  return s;
}

}  // namespace blvt::data
