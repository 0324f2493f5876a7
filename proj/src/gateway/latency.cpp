#include "cellgate/gateway/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cellgate/error.hpp"
#include "httplib.h"

namespace cellgate::gateway {

nlohmann::json LatencyReport::to_json() const {
  return {{"endpoint", endpoint}, {"n", n},           {"min_ms", min_ms}, {"median_ms", median_ms},
          {"p95_ms", p95_ms},     {"mean_ms", mean_ms}, {"max_ms", max_ms}};
}

std::string LatencyReport::table() const {
  std::string out = fmt::format("Latency of one API call: {} (n={}, warm kept-alive connection)\n", endpoint, n);
  out += fmt::format("  {:<8} {:>10}\n", "metric", "ms");
  out += fmt::format("  {:<8} {:>10.3f}\n", "min", min_ms);
  out += fmt::format("  {:<8} {:>10.3f}\n", "median", median_ms);
  out += fmt::format("  {:<8} {:>10.3f}\n", "p95", p95_ms);
  out += fmt::format("  {:<8} {:>10.3f}\n", "mean", mean_ms);
  out += fmt::format("  {:<8} {:>10.3f}\n", "max", max_ms);
  out += "Historical mean per call, LAN, other hardware (context only, not comparable):\n";
  out += "  Apache AXIS 1.4 (SOAP)          10.10\n";
  out += "  SOAP::Lite 0.65 beta 3          28.11\n";
  out += "  Microsoft SOAP Toolkit 3.0      12.22\n";
  out += "  CORBA (Java client/server)       1.02\n";
  return out;
}

LatencyReport summarize(const std::string& endpoint, std::vector<double> samples) {
  if (samples.empty()) fail(Errc::invalid_argument, "latency report needs at least one sample");
  std::sort(samples.begin(), samples.end());
  LatencyReport r;
  r.endpoint = endpoint;
  r.n = samples.size();
  r.min_ms = samples.front();
  r.max_ms = samples.back();
  auto mid = r.n / 2;
  r.median_ms = r.n % 2 ? samples[mid] : (samples[mid - 1] + samples[mid]) / 2.0;
  auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(r.n)));
  r.p95_ms = samples[std::max<std::size_t>(rank, 1) - 1];
  r.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(r.n);
  return r;
}

LatencyReport measure_latency(const std::string& base_url, const std::string& path, const std::string& token,
                              std::size_t n) {
  if (n == 0) fail(Errc::invalid_argument, "n must be positive");
  httplib::Client cli(base_url);
  cli.set_keep_alive(true);
  cli.set_connection_timeout(5);
  cli.set_read_timeout(10);
  httplib::Headers headers{{"Authorization", "Bearer " + token}};
  auto once = [&] {
    auto res = cli.Get(path, headers);
    if (!res) fail(Errc::http_failure, "GET " + path + ": " + httplib::to_string(res.error()));
    if (res->status != 200) fail(Errc::http_failure, "GET " + path + " returned " + std::to_string(res->status));
  };
  once();  // connection setup is not measured
  std::vector<double> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    once();
    samples.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return summarize(path, std::move(samples));
}

}  // namespace cellgate::gateway
