#include "pftopo/log.hpp"

#include <atomic>
#include <iostream>

namespace pftopo {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::Warning)};
}

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_info(const std::string& message) {
  if (g_level >= static_cast<int>(LogLevel::Info)) std::cerr << "[info] " << message << '\n';
}

void log_warning(const std::string& message) {
  if (g_level >= static_cast<int>(LogLevel::Warning)) std::cerr << "[warn] " << message << '\n';
}

}  // namespace pftopo
