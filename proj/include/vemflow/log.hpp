#pragma once

#include <functional>
#include <string>

namespace vemflow {

enum class LogLevel { Debug = 0, Info = 1, Warning = 2, Error = 3, Off = 4 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Messages below the threshold are dropped. Default threshold is Warning,
// default sink writes to stderr.
void set_log_level(LogLevel level);
LogLevel log_level();
void set_log_sink(LogSink sink);
void log(LogLevel level, const std::string& message);

inline void log_warning(const std::string& m) { log(LogLevel::Warning, m); }
inline void log_info(const std::string& m) { log(LogLevel::Info, m); }

}  // namespace vemflow
