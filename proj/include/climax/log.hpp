#ifndef CLIMAX_LOG_HPP
#define CLIMAX_LOG_HPP

#include <iostream>
#include <mutex>
#include <string>

namespace climax {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Silent = 3 };

inline LogLevel& log_threshold() {
  static LogLevel level = LogLevel::Warn;
  return level;
}

inline void log_message(LogLevel level, const std::string& msg) {
  if (level < log_threshold()) return;
  static std::mutex mu;
  static const char* tags[] = {"debug", "info", "warn"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[climax " << tags[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void log_debug(const std::string& msg) { log_message(LogLevel::Debug, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::Warn, msg); }

}  // namespace climax

#endif  // CLIMAX_LOG_HPP
