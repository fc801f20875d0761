#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace mrs::log {

enum class Level { Debug, Info, Warn, Error };

using Sink = std::function<void(Level, std::string_view component, std::string_view message)>;

// Replaces the process-wide sink (default: stderr). Returns the previous one.
Sink set_sink(Sink sink);
void set_min_level(Level level);

void write(Level level, std::string_view component, std::string_view message);
inline void debug(std::string_view c, std::string_view m) { write(Level::Debug, c, m); }
inline void info(std::string_view c, std::string_view m) { write(Level::Info, c, m); }
inline void warn(std::string_view c, std::string_view m) { write(Level::Warn, c, m); }
inline void error(std::string_view c, std::string_view m) { write(Level::Error, c, m); }

// "<redacted:N chars>"; the only form in which secrets reach a log line.
std::string redact(std::string_view secret);

}  // namespace mrs::log
