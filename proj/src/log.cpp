#include "mrs/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace mrs::log {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

const char* level_name(Level level) {
  switch (level) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
  }
  return "?";
}

Sink& current_sink() {
  static Sink sink = [](Level level, std::string_view component, std::string_view message) {
    std::cerr << '[' << level_name(level) << "] " << component << ": " << message << '\n';
  };
  return sink;
}

std::atomic<Level> min_level{Level::Info};

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  Sink previous = std::move(current_sink());
  current_sink() = std::move(sink);
  return previous;
}

void set_min_level(Level level) { min_level = level; }

void write(Level level, std::string_view component, std::string_view message) {
  if (level < min_level.load()) return;
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(level, component, message);
}

std::string redact(std::string_view secret) { return "<redacted:" + std::to_string(secret.size()) + " chars>"; }

}  // namespace mrs::log
