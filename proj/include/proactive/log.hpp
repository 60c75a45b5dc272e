#ifndef PROACTIVE_LOG_HPP
#define PROACTIVE_LOG_HPP

#include <functional>
#include <iostream>
#include <string>
#include <utility>

namespace proactive {

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& message) { std::cerr << "warning: " << message << '\n'; };
  return sink;
}

/// Swaps the process-wide warning sink; returns the previous one.
inline WarningSink set_warning_sink(WarningSink sink) { return std::exchange(warning_sink(), std::move(sink)); }

inline void warn(const std::string& message) {
  if (warning_sink()) warning_sink()(message);
}

}  // namespace proactive

#endif  // PROACTIVE_LOG_HPP
