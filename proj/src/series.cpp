#include "blvt/data/series.hpp"

#include <algorithm>
#include <string>

#include "blvt/errors.hpp"

namespace blvt::data {

std::size_t AlignedSeries::index_of(Timestamp t) const {
  const auto it = std::lower_bound(timestamps.begin(), timestamps.end(), t);
  if (it == timestamps.end() || *it != t)
    throw RangeError("series: no candle at " + format_utc(t));
  return static_cast<std::size_t>(it - timestamps.begin());
}

namespace {

void compute_returns(TickerColumns& tc) {
  tc.returns.clear();
  if (tc.close.size() < 2) return;
  tc.returns.reserve(tc.close.size() - 1);
  for (std::size_t i = 1; i < tc.close.size(); ++i)
    tc.returns.push_back(tc.close[i] / tc.close[i - 1] - 1.0);
}

void push_candle(TickerColumns& tc, const Candle& c) {
  tc.open.push_back(c.open);
  tc.high.push_back(c.high);
  tc.low.push_back(c.low);
  tc.close.push_back(c.close);
  tc.volume.push_back(c.volume);
}

// Flat candle at the previous close; volume 0.
void push_fill(TickerColumns& tc) {
  const double prev = tc.close.back();
  tc.open.push_back(prev);
  tc.high.push_back(prev);
  tc.low.push_back(prev);
  tc.close.push_back(prev);
  tc.volume.push_back(0.0);
}

std::vector<Timestamp> intersect_times(const std::vector<Candle>& a, const std::vector<Candle>& b,
                                       const std::vector<Candle>& c) {
  std::vector<Timestamp> ta, tb, tc;
  for (const auto& x : a) ta.push_back(x.open_time);
  for (const auto& x : b) tb.push_back(x.open_time);
  for (const auto& x : c) tc.push_back(x.open_time);
  std::vector<Timestamp> ab, abc;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(ab));
  std::set_intersection(ab.begin(), ab.end(), tc.begin(), tc.end(), std::back_inserter(abc));
  return abc;
}

}  // namespace

AlignedSeries align(const std::vector<Candle>& btc, const std::vector<Candle>& up,
                    const std::vector<Candle>& down, bool gap_fill) {
  const std::array<const std::vector<Candle>*, kTickers> inputs{&btc, &up, &down};
  for (const auto* v : inputs) {
    if (v->empty()) throw EmptyRangeError("align: empty candle series");
    for (std::size_t i = 0; i < v->size(); ++i) {
      validate_candle((*v)[i]);
      if (i > 0 && (*v)[i].open_time <= (*v)[i - 1].open_time)
        throw OrderError("align: input timestamps not strictly increasing");
    }
  }

  const auto common = intersect_times(btc, up, down);
  if (common.empty()) throw EmptyRangeError("align: no common timestamps");

  // Missing hours of the full grid spanned by the common timestamps.
  std::vector<Timestamp> missing;
  for (std::size_t i = 1; i < common.size(); ++i)
    for (Timestamp t = common[i - 1] + kHour; t < common[i]; t += kHour) missing.push_back(t);

  if (!missing.empty() && !gap_fill) {
    std::string msg = "align: " + std::to_string(missing.size()) + " missing hour(s):";
    const std::size_t shown = std::min<std::size_t>(missing.size(), 8);
    for (std::size_t i = 0; i < shown; ++i) msg += " " + format_utc(missing[i]);
    if (missing.size() > shown)
      msg += " and " + std::to_string(missing.size() - shown) + " more";
    throw GapError(msg);
  }

  AlignedSeries out;
  out.gap_filled = !missing.empty();
  out.filled_hours = missing.size();

  std::array<std::size_t, kTickers> cursor{0, 0, 0};
  for (Timestamp t = common.front(); t <= common.back(); t += kHour) {
    const bool is_common = std::binary_search(common.begin(), common.end(), t);
    out.timestamps.push_back(t);
    for (int k = 0; k < kTickers; ++k) {
      const auto& src = *inputs[k];
      auto& cur = cursor[k];
      while (cur < src.size() && src[cur].open_time < t) ++cur;
      if (is_common) {
        // t is common, so every ticker has a candle at t.
        push_candle(out.tickers[k], src[cur]);
      } else {
        push_fill(out.tickers[k]);
      }
    }
  }
  for (auto& tc : out.tickers) compute_returns(tc);
  return out;
}

namespace {

AlignedSeries slice(const AlignedSeries& s, std::size_t i0, std::size_t i1) {
  AlignedSeries out;
  out.gap_filled = s.gap_filled;
  out.filled_hours = s.filled_hours;
  out.timestamps.assign(s.timestamps.begin() + static_cast<std::ptrdiff_t>(i0),
                        s.timestamps.begin() + static_cast<std::ptrdiff_t>(i1 + 1));
  for (int k = 0; k < kTickers; ++k) {
    const auto& src = s.tickers[k];
    auto& dst = out.tickers[k];
    const auto copy = [&](const std::vector<double>& v) {
      return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(i0),
                                 v.begin() + static_cast<std::ptrdiff_t>(i1 + 1));
    };
    dst.open = copy(src.open);
    dst.high = copy(src.high);
    dst.low = copy(src.low);
    dst.close = copy(src.close);
    dst.volume = copy(src.volume);
    compute_returns(dst);
  }
  return out;
}

std::size_t bound_index(const std::vector<Timestamp>& ts, Timestamp t, bool from_below) {
  if (from_below) {
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    if (it == ts.end()) throw RangeError("split: boundary " + format_utc(t) + " beyond dataset");
    return static_cast<std::size_t>(it - ts.begin());
  }
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  if (it == ts.begin()) throw RangeError("split: boundary " + format_utc(t) + " before dataset");
  return static_cast<std::size_t>(it - ts.begin()) - 1;
}

}  // namespace

std::pair<AlignedSeries, AlignedSeries> split(const AlignedSeries& aligned,
                                              const SplitSpec& spec) {
  if (!(spec.train_start <= spec.train_end && spec.train_end < spec.test_start &&
        spec.test_start <= spec.test_end))
    throw RangeError("split: spec boundaries must satisfy train < test");
  const std::size_t a0 = bound_index(aligned.timestamps, spec.train_start, true);
  const std::size_t a1 = bound_index(aligned.timestamps, spec.train_end, false);
  const std::size_t b0 = bound_index(aligned.timestamps, spec.test_start, true);
  const std::size_t b1 = bound_index(aligned.timestamps, spec.test_end, false);
  if (a1 < a0 || b1 < b0) throw RangeError("split: empty slice");
  return {slice(aligned, a0, a1), slice(aligned, b0, b1)};
}

std::vector<SplitSpec> walk_forward_periods() {
  const auto T = [](const char* s) { return parse_utc(s); };
  return {
      {T("2020-05-15 00:00"), T("2021-07-03 23:00"), T("2021-07-04 00:00"), T("2021-09-01 23:00")},
      {T("2020-05-15 00:00"), T("2021-09-01 23:00"), T("2021-09-02 00:00"), T("2021-10-31 23:00")},
      {T("2020-05-15 00:00"), T("2021-10-31 23:00"), T("2021-11-01 00:00"), T("2021-12-30 23:00")},
  };
}

}  // namespace blvt::data
