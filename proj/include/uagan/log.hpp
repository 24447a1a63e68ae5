#pragma once

// Minimal stderr logger. The level comes from UAFG_LOG (error, info, debug;
// default info) and can be overridden in code.

#include <string>

namespace uagan {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Parses UAFG_LOG; unknown values fall back to info.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace uagan
