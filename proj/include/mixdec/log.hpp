#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace mixdec::log {

inline std::atomic<bool>& quiet_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline void set_quiet(bool q) { quiet_flag() = q; }

inline void warn(std::string_view msg) {
  if (!quiet_flag()) std::cerr << "warning: " << msg << '\n';
}

inline void info(std::string_view msg) {
  if (!quiet_flag()) std::cerr << msg << '\n';
}

}  // namespace mixdec::log
