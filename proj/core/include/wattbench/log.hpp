#pragma once

#include <string>

namespace wattbench {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// Threshold comes from the WATTBENCH_LOG environment variable
// (error|warn|info|debug), read once; defaults to warn.
LogLevel log_threshold();

void log(LogLevel level, const std::string& message);

inline void log_warn(const std::string& message) { log(LogLevel::warn, message); }
inline void log_info(const std::string& message) { log(LogLevel::info, message); }
inline void log_debug(const std::string& message) { log(LogLevel::debug, message); }

}  // namespace wattbench
