#include "plp/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace plp::log {

namespace {
std::atomic<Level> g_level{Level::info};
std::mutex g_mutex;

void emit(Level at, const char* tag, std::string_view message) {
    if (at < g_level.load()) return;
    std::lock_guard lock(g_mutex);
    std::cerr << "[" << tag << "] " << message << '\n';
}
}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void info(std::string_view message) { emit(Level::info, "info", message); }
void warning(std::string_view message) { emit(Level::warning, "warn", message); }
void error(std::string_view message) { emit(Level::error, "error", message); }

}  // namespace plp::log
