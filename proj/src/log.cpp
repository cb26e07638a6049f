#include "m2dl/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace m2dl {

namespace {
std::atomic<LogLevel> g_level{LogLevel::Warn};
std::mutex g_mutex;
}  // namespace

void set_log_level(LogLevel level) noexcept { g_level = level; }
LogLevel log_level() noexcept { return g_level; }

void log_warn(std::string_view msg) {
    if (g_level < LogLevel::Warn) return;
    std::lock_guard lock(g_mutex);
    std::cerr << "[m2dl] warning: " << msg << '\n';
}

void log_info(std::string_view msg) {
    if (g_level < LogLevel::Info) return;
    std::lock_guard lock(g_mutex);
    std::cerr << "[m2dl] " << msg << '\n';
}

}  // namespace m2dl
