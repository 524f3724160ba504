#include "vemflow/log.hpp"

#include <iostream>
#include <mutex>

namespace vemflow {
namespace {

struct LogState {
  std::mutex mutex;
  LogLevel level = LogLevel::Warning;
  LogSink sink;
};

LogState& state() {
  static LogState s;
  return s;
}

const char* tag(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warning: return "warning";
    case LogLevel::Error: return "error";
    default: return "";
  }
}

}  // namespace

void set_log_level(LogLevel level) {
  std::lock_guard lock(state().mutex);
  state().level = level;
}

LogLevel log_level() {
  std::lock_guard lock(state().mutex);
  return state().level;
}

void set_log_sink(LogSink sink) {
  std::lock_guard lock(state().mutex);
  state().sink = std::move(sink);
}

void log(LogLevel level, const std::string& message) {
  std::lock_guard lock(state().mutex);
  if (level < state().level) return;
  if (state().sink) {
    state().sink(level, message);
  } else {
    std::cerr << "[vemflow " << tag(level) << "] " << message << '\n';
  }
}

}  // namespace vemflow
