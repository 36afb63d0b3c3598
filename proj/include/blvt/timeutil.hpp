#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace blvt {

// Seconds since the Unix epoch, UTC. All series in this project live on a
// 1-hour grid, so second resolution is more than enough.
using Timestamp = std::int64_t;

inline constexpr Timestamp kHour = 3600;
inline constexpr Timestamp kDay = 86400;

// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]" and the ISO forms
// "YYYY-MM-DDTHH:MM[:SS]Z" (trailing Z optional). Throws ParseError.
Timestamp parse_utc(std::string_view text);

// Canonical form: "2020-05-15T07:00:00Z".
std::string format_utc(Timestamp t);

inline bool hour_aligned(Timestamp t) { return t % kHour == 0; }

}  // namespace blvt
