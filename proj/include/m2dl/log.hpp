#pragma once

#include <string_view>

namespace m2dl {

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2 };

void set_log_level(LogLevel level) noexcept;
LogLevel log_level() noexcept;
void log_warn(std::string_view msg);
void log_info(std::string_view msg);

}  // namespace m2dl
