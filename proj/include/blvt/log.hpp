#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace blvt::log {

enum class Level { kInfo, kWarn };

namespace detail {
inline std::mutex& mu() {
  static std::mutex m;
  return m;
}
inline std::function<void(Level, const std::string&)>& sink() {
  static std::function<void(Level, const std::string&)> s =
      [](Level lv, const std::string& msg) {
        std::lock_guard<std::mutex> lock(mu());
        std::cerr << (lv == Level::kWarn ? "[warn] " : "[info] ") << msg << "\n";
      };
  return s;
}
}  // namespace detail

// Tests replace the sink to capture or silence events.
inline void set_sink(std::function<void(Level, const std::string&)> s) { detail::sink() = std::move(s); }

inline void info(const std::string& msg) { detail::sink()(Level::kInfo, msg); }
inline void warn(const std::string& msg) { detail::sink()(Level::kWarn, msg); }

}  // namespace blvt::log
