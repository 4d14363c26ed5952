#pragma once

#include <string_view>

namespace plp::log {

enum class Level { debug, info, warning, error, off };

void set_level(Level level);
Level level();

void info(std::string_view message);
void warning(std::string_view message);
void error(std::string_view message);

}  // namespace plp::log
