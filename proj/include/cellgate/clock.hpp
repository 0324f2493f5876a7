#pragma once

#include <atomic>
#include <chrono>
#include <memory>

namespace cellgate {

using SteadyTime = std::chrono::steady_clock::time_point;

// Injectable time source; the simulator runs on a ManualClock in tests.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual SteadyTime now() const = 0;
};

class SystemClock final : public Clock {
 public:
  SteadyTime now() const override { return std::chrono::steady_clock::now(); }
};

class ManualClock final : public Clock {
 public:
  SteadyTime now() const override {
    return SteadyTime(std::chrono::steady_clock::duration(ticks_.load()));
  }
  void advance(std::chrono::steady_clock::duration d) { ticks_ += d.count(); }

 private:
  std::atomic<std::chrono::steady_clock::rep> ticks_{0};
};

inline std::shared_ptr<Clock> system_clock() {
  static auto clock = std::make_shared<SystemClock>();
  return clock;
}

}  // namespace cellgate
