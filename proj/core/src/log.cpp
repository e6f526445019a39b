#include "wattbench/log.hpp"

#include <cstdlib>
#include <iostream>

namespace wattbench {

namespace {

LogLevel parse_threshold() {
  const char* env = std::getenv("WATTBENCH_LOG");
  if (env == nullptr) return LogLevel::warn;
  const std::string value(env);
  if (value == "error") return LogLevel::error;
  if (value == "warn") return LogLevel::warn;
  if (value == "info") return LogLevel::info;
  if (value == "debug") return LogLevel::debug;
  return LogLevel::warn;
}

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "?";
}

}  // namespace

LogLevel log_threshold() {
  static const LogLevel threshold = parse_threshold();
  return threshold;
}

void log(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(log_threshold())) return;
  std::cerr << "[wattbench " << level_tag(level) << "] " << message << '\n';
}

}  // namespace wattbench
