#pragma once

// Minimal leveled logging to stderr. The level comes from the WTL_LOG
// environment variable (error, warn, info, debug); the default is warn.

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>

namespace wtl::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

inline Level parse_level(std::string_view s, Level fallback = Level::warn) {
  if (s == "error") return Level::error;
  if (s == "warn" || s == "warning") return Level::warn;
  if (s == "info") return Level::info;
  if (s == "debug") return Level::debug;
  return fallback;
}

inline Level& threshold() {
  static Level level = [] {
    const char* env = std::getenv("WTL_LOG");
    return env ? parse_level(env) : Level::warn;
  }();
  return level;
}

inline bool enabled(Level l) { return static_cast<int>(l) <= static_cast<int>(threshold()); }

template <typename... Args>
void write(Level l, const Args&... args) {
  if (!enabled(l)) return;
  static constexpr const char* kTags[] = {"error", "warn", "info", "debug"};
  std::ostringstream os;
  os << "[wtl " << kTags[static_cast<int>(l)] << "] ";
  (os << ... << args);
  os << '\n';
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << os.str();
}

template <typename... Args>
void error(const Args&... args) { write(Level::error, args...); }
template <typename... Args>
void warn(const Args&... args) { write(Level::warn, args...); }
template <typename... Args>
void info(const Args&... args) { write(Level::info, args...); }
template <typename... Args>
void debug(const Args&... args) { write(Level::debug, args...); }

}  // namespace wtl::log
