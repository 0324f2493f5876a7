#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace cellgate::cli {

// argv[0] is the program name. Exit codes: 0 ok, 1 API or runtime error, 2 usage error.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

// Makes `serve`, `sim` and `events` return. Safe to call from a signal handler.
void request_shutdown() noexcept;
void reset_shutdown() noexcept;

// Aligned text table for an array of objects; key/value lines for an object.
std::string render_pretty(const nlohmann::json& j);

}  // namespace cellgate::cli
