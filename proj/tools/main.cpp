#include <csignal>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cellgate/cli/cli.hpp"

namespace {
void on_signal(int) { cellgate::cli::request_shutdown(); }
}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::signal(SIGPIPE, SIG_IGN);
  spdlog::set_default_logger(spdlog::stderr_color_mt("cellgate"));
  if (const char* level = std::getenv("CELLGATE_LOG")) spdlog::set_level(spdlog::level::from_str(level));
  std::vector<std::string> args(argv, argv + argc);
  return cellgate::cli::run(args, std::cout, std::cerr);
}
