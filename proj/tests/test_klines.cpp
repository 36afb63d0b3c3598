#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "blvt/data/klines.hpp"
#include "blvt/errors.hpp"
#include "blvt/timeutil.hpp"

using blvt::kHour;

namespace {

constexpr blvt::Timestamp kT0 = 1609459200;  // 2021-01-01 00:00 UTC

// Deterministic candle for hour index i, prices as strings like the real API.
nlohmann::json kline_row(std::int64_t i, bool numeric) {
  const double open = 10.0 + 0.01 * static_cast<double>(i % 500);
  const double close = open + 0.5;
  const double high = close + 1.0;
  const double low = open - 1.0;
  const double volume = 1000.0 + static_cast<double>(i % 97);
  nlohmann::json row = nlohmann::json::array();
  row.push_back((kT0 + i * kHour) * 1000);
  for (double v : {open, high, low, close, volume}) {
    if (numeric)
      row.push_back(v);
    else
      row.push_back(std::to_string(v));
  }
  return row;
}

// Local stand-in for the klines endpoint. Behavior keys off the symbol name.
class FakeExchange {
 public:
  FakeExchange() {
    svr_.Get("/api/v3/klines", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    port_ = svr_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }

  ~FakeExchange() {
    svr_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_.load(); }
  void reset_counters() {
    requests_ = 0;
    rate_limited_ = 0;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    const std::string symbol = req.get_param_value("symbol");

    if (symbol.rfind("LIMIT", 0) == 0) {
      res.status = 429;
      return;
    }
    if (symbol.rfind("FLAKY", 0) == 0 && rate_limited_.fetch_add(1) < 2) {
      res.status = 429;
      return;
    }
    if (symbol.rfind("ERR500", 0) == 0) {
      res.status = 500;
      return;
    }
    if (symbol.rfind("BADJSON", 0) == 0) {
      res.set_content("{not json", "application/json");
      return;
    }
    if (symbol.rfind("SHORTROW", 0) == 0) {
      res.set_content("[[1609459200000, \"10\", \"11\", \"9\"]]", "application/json");
      return;
    }

    const auto start_ms = std::stoll(req.get_param_value("startTime"));
    const auto end_ms = std::stoll(req.get_param_value("endTime"));
    const auto limit = std::stoi(req.get_param_value("limit"));
    const bool numeric = symbol.rfind("NUM", 0) == 0;
    const bool gappy = symbol.rfind("GAPPY", 0) == 0;

    nlohmann::json body = nlohmann::json::array();
    std::int64_t i = (start_ms / 1000 - kT0) / kHour;
    if (i < 0) i = 0;
    int emitted = 0;
    while (emitted < limit) {
      const std::int64_t ts_ms = (kT0 + i * kHour) * 1000;
      if (ts_ms > end_ms) break;
      if (!(gappy && i == 5)) {
        body.push_back(kline_row(i, numeric));
        ++emitted;
      }
      ++i;
    }
    res.set_content(body.dump(), "application/json");
  }

  httplib::Server svr_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
  std::atomic<int> rate_limited_{0};
};

FakeExchange& exchange() {
  static FakeExchange fx;
  return fx;
}

blvt::data::KlinesConfig test_config(const std::string& cache_tag) {
  blvt::data::KlinesConfig cfg;
  cfg.base_url = exchange().base_url();
  cfg.backoff_ms = 1;
  if (cache_tag.empty()) {
    cfg.use_cache = false;
  } else {
    cfg.cache_dir = (std::filesystem::temp_directory_path() /
                     ("blvt_klines_" + cache_tag + "_" + std::to_string(::getpid())))
                        .string();
  }
  return cfg;
}

}  // namespace

TEST_CASE("fetch_klines returns the requested hourly span") {
  auto& fx = exchange();
  fx.reset_counters();
  const auto cfg = test_config("");
  const auto c = blvt::data::fetch_klines("UPUSDT", kT0, kT0 + 30 * kHour, cfg);
  REQUIRE(c.size() == 30);
  CHECK(c.front().open_time == kT0);
  CHECK(c.back().open_time == kT0 + 29 * kHour);
  for (std::size_t i = 1; i < c.size(); ++i)
    CHECK(c[i].open_time == c[i - 1].open_time + kHour);
  // String-encoded prices parse to the generating values.
  CHECK(c[3].open == doctest::Approx(10.03).epsilon(1e-12));
  CHECK(c[3].close == doctest::Approx(10.53).epsilon(1e-12));
}

TEST_CASE("fetch_klines paginates until the range is covered") {
  auto& fx = exchange();
  fx.reset_counters();
  auto cfg = test_config("");
  cfg.page_limit = 16;
  const auto c = blvt::data::fetch_klines("UPUSDT", kT0, kT0 + 50 * kHour, cfg);
  REQUIRE(c.size() == 50);
  CHECK(fx.requests() >= 4);  // ceil(50/16)
  for (std::size_t i = 1; i < c.size(); ++i)
    CHECK(c[i].open_time == c[i - 1].open_time + kHour);
}

TEST_CASE("fetch_klines accepts numeric JSON fields") {
  const auto cfg = test_config("");
  const auto c = blvt::data::fetch_klines("NUMUSDT", kT0, kT0 + 5 * kHour, cfg);
  REQUIRE(c.size() == 5);
  CHECK(c[0].open == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("fetch_klines serves repeat calls from the cache") {
  auto& fx = exchange();
  const auto cfg = test_config("hit");
  std::filesystem::remove_all(cfg.cache_dir);

  fx.reset_counters();
  const auto first = blvt::data::fetch_klines("UPUSDT", kT0, kT0 + 24 * kHour, cfg);
  REQUIRE(first.size() == 24);
  const int after_first = fx.requests();
  CHECK(after_first >= 1);
  CHECK(std::filesystem::exists(cfg.cache_dir + "/UPUSDT_1h.csv"));

  const auto again = blvt::data::fetch_klines("UPUSDT", kT0, kT0 + 24 * kHour, cfg);
  CHECK(fx.requests() == after_first);  // no network traffic
  REQUIRE(again.size() == 24);
  for (std::size_t i = 0; i < 24; ++i) {
    CHECK(again[i].open_time == first[i].open_time);
    CHECK(again[i].close == first[i].close);
  }

  // A subrange is also a cache hit.
  const auto sub = blvt::data::fetch_klines("UPUSDT", kT0 + 5 * kHour, kT0 + 10 * kHour, cfg);
  CHECK(fx.requests() == after_first);
  REQUIRE(sub.size() == 5);
  CHECK(sub.front().open_time == kT0 + 5 * kHour);
  std::filesystem::remove_all(cfg.cache_dir);
}

TEST_CASE("fetch_klines merges new spans into the cache file") {
  const auto cfg = test_config("merge");
  std::filesystem::remove_all(cfg.cache_dir);
  blvt::data::fetch_klines("UPUSDT", kT0, kT0 + 10 * kHour, cfg);
  blvt::data::fetch_klines("UPUSDT", kT0 + 5 * kHour, kT0 + 20 * kHour, cfg);
  const auto cached = blvt::data::ingest_csv(cfg.cache_dir + "/UPUSDT_1h.csv");
  REQUIRE(cached.size() == 20);
  CHECK(cached.front().open_time == kT0);
  CHECK(cached.back().open_time == kT0 + 19 * kHour);
  std::filesystem::remove_all(cfg.cache_dir);
}

TEST_CASE("fetch_klines surfaces persistent rate limiting") {
  auto& fx = exchange();
  fx.reset_counters();
  auto cfg = test_config("");
  cfg.max_retries = 3;
  CHECK_THROWS_AS(blvt::data::fetch_klines("LIMITUSDT", kT0, kT0 + 2 * kHour, cfg),
                  blvt::RateLimitError);
  CHECK(fx.requests() == cfg.max_retries + 1);
}

TEST_CASE("fetch_klines retries through transient rate limiting") {
  auto& fx = exchange();
  fx.reset_counters();
  const auto cfg = test_config("");
  const auto c = blvt::data::fetch_klines("FLAKYUSDT", kT0, kT0 + 4 * kHour, cfg);
  REQUIRE(c.size() == 4);
  CHECK(fx.requests() == 3);  // two 429s, then success
}

TEST_CASE("fetch_klines reports interior gaps with timestamps") {
  const auto cfg = test_config("");
  CHECK_THROWS_WITH_AS(blvt::data::fetch_klines("GAPPYUSDT", kT0, kT0 + 10 * kHour, cfg),
                       doctest::Contains("2021-01-01T05:00"), blvt::GapError);
}

TEST_CASE("fetch_klines input and transport errors") {
  auto cfg = test_config("");
  CHECK_THROWS_AS(blvt::data::fetch_klines("UPUSDT", kT0, kT0, cfg), blvt::EmptyRangeError);
  CHECK_THROWS_AS(blvt::data::fetch_klines("UPUSDT", kT0 + 7, kT0 + kHour + 7, cfg),
                  blvt::RangeError);
  CHECK_THROWS_AS(blvt::data::fetch_klines("ERR500USDT", kT0, kT0 + kHour, cfg),
                  blvt::NetworkError);
  CHECK_THROWS_AS(blvt::data::fetch_klines("BADJSONUSDT", kT0, kT0 + kHour, cfg),
                  blvt::ParseError);
  CHECK_THROWS_AS(blvt::data::fetch_klines("SHORTROWUSDT", kT0, kT0 + kHour, cfg),
                  blvt::ParseError);

  cfg.base_url = "http://127.0.0.1:1";  // nothing listens here
  cfg.max_retries = 0;
  CHECK_THROWS_AS(blvt::data::fetch_klines("UPUSDT", kT0, kT0 + kHour, cfg),
                  blvt::NetworkError);
}
