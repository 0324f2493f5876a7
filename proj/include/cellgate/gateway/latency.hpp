#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

namespace cellgate::gateway {

struct LatencyReport {
  std::string endpoint;
  std::size_t n = 0;
  double min_ms = 0;
  double median_ms = 0;
  double p95_ms = 0;
  double mean_ms = 0;
  double max_ms = 0;

  nlohmann::json to_json() const;
  // Human-readable report, with historical per-call averages of older RPC stacks
  // printed underneath for context only.
  std::string table() const;
};

// Median averages the two middle samples for even n; p95 is nearest-rank.
// Throws Error(invalid_argument) on an empty sample set.
LatencyReport summarize(const std::string& endpoint, std::vector<double> samples_ms);

// One warm-up request opens the connection; the n timed requests reuse it.
// Throws Error(invalid_argument) for n == 0 and Error(http_failure) when a request fails.
LatencyReport measure_latency(const std::string& base_url, const std::string& path, const std::string& token,
                              std::size_t n);

}  // namespace cellgate::gateway
