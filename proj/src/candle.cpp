#include "blvt/data/candle.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "blvt/errors.hpp"

namespace blvt::data {

void validate_candle(const Candle& c) {
  const auto at = [&] { return " at " + format_utc(c.open_time); };
  if (!(c.open > 0.0 && c.high > 0.0 && c.low > 0.0 && c.close > 0.0))
    throw RangeError("candle: non-positive price" + at());
  if (!(c.volume >= 0.0)) throw RangeError("candle: negative volume" + at());
  if (c.low > std::min(c.open, c.close) || c.high < std::max(c.open, c.close))
    throw RangeError("candle: OHLC ordering violated" + at());
}

namespace {

double parse_field(std::string_view s, const char* name, std::size_t line_no) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end)
    throw ParseError("csv line " + std::to_string(line_no) + ": bad " + name + " field '" +
                     std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split_row(std::string_view row) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = row.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(row.substr(start));
      return out;
    }
    out.push_back(row.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

std::vector<Candle> ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::vector<Candle> candles;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("open_time", 0) == 0) continue;

    const auto fields = split_row(line);
    if (fields.size() != 6)
      throw ParseError("csv line " + std::to_string(line_no) + ": expected 6 fields, got " +
                       std::to_string(fields.size()));
    Candle c;
    c.open_time = parse_utc(fields[0]);
    c.open = parse_field(fields[1], "open", line_no);
    c.high = parse_field(fields[2], "high", line_no);
    c.low = parse_field(fields[3], "low", line_no);
    c.close = parse_field(fields[4], "close", line_no);
    c.volume = parse_field(fields[5], "volume", line_no);
    validate_candle(c);
    if (!candles.empty() && c.open_time <= candles.back().open_time)
      throw OrderError("csv line " + std::to_string(line_no) +
                       ": open_time not strictly increasing at " + format_utc(c.open_time));
    candles.push_back(c);
  }
  return candles;
}

void write_csv(const std::string& path, const std::vector<Candle>& candles) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "open_time,open,high,low,close,volume\n";
  char buf[512];
  for (const auto& c : candles) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  format_utc(c.open_time).c_str(), c.open, c.high, c.low, c.close, c.volume);
    out << buf;
  }
  if (!out) throw ParseError("write failed for " + path);
}

}  // namespace blvt::data
