#include "uagan/log.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>

namespace uagan {
namespace {

LogLevel from_env() {
  const char* v = std::getenv("UAFG_LOG");
  if (!v) return LogLevel::kInfo;
  if (std::strcmp(v, "error") == 0) return LogLevel::kError;
  if (std::strcmp(v, "debug") == 0) return LogLevel::kDebug;
  return LogLevel::kInfo;
}

std::atomic<int>& level_slot() {
  static std::atomic<int> level{static_cast<int>(from_env())};
  return level;
}

void emit(LogLevel level, const char* tag, const std::string& msg) {
  if (static_cast<int>(level) > level_slot().load()) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[" << tag << "] " << msg << '\n';
}

}  // namespace

LogLevel log_level() { return static_cast<LogLevel>(level_slot().load()); }
void set_log_level(LogLevel level) { level_slot().store(static_cast<int>(level)); }

void log_error(const std::string& msg) { emit(LogLevel::kError, "error", msg); }
void log_info(const std::string& msg) { emit(LogLevel::kInfo, "info", msg); }
void log_debug(const std::string& msg) { emit(LogLevel::kDebug, "debug", msg); }

}  // namespace uagan
