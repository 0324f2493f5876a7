#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "cellgate/at/command.hpp"
#include "cellgate/at/quirks.hpp"
#include "cellgate/error.hpp"
#include "cellgate/transport.hpp"

namespace cellgate::at {

struct AtResponse {
  std::vector<AtResponseLine> info;
  FinalResult final;
  bool aborted = false;      // payload submission cancelled with ESC
  bool unsupported = false;  // refused locally by the quirk profile

  bool ok() const noexcept { return !unsupported && final.is_ok(); }
  // raw_values of every info line carrying `prefix`.
  std::vector<std::string> values(std::string_view prefix) const;
  // raw_values of the first such line, or empty.
  std::string value(std::string_view prefix) const;
};

// A command that completed with a non-ok final result.
class AtCommandError : public Error {
 public:
  AtCommandError(std::string command, FinalResult final);
  const FinalResult& final() const noexcept { return final_; }
  const std::string& command() const noexcept { return command_; }

 private:
  std::string command_;
  FinalResult final_;
};

// Throws AtCommandError unless `r` is ok.
const AtResponse& expect_ok(const AtResponse& r, std::string_view command);

class UrcSubscription {
 public:
  struct Queue;
  struct Hub;

  UrcSubscription(std::shared_ptr<Hub> hub, std::shared_ptr<Queue> queue);
  ~UrcSubscription();
  UrcSubscription(UrcSubscription&&) noexcept = default;
  UrcSubscription& operator=(UrcSubscription&&) noexcept = default;

  std::optional<Urc> next(std::chrono::milliseconds timeout);
  std::size_t dropped() const;

 private:
  std::shared_ptr<Hub> hub_;
  std::shared_ptr<Queue> queue_;
};

class AtEngine;

// Holds the command slot between the "> " prompt and the payload.
// Destroying it unsent cancels the submission with ESC.
class PayloadExchange {
 public:
  PayloadExchange(PayloadExchange&& other) noexcept;
  PayloadExchange& operator=(PayloadExchange&&) = delete;
  ~PayloadExchange();

  // Writes body + Ctrl-Z. A body of exactly "\x1B" aborts instead.
  AtResponse send(std::string_view body);

 private:
  friend class AtEngine;
  PayloadExchange(AtEngine* engine, std::chrono::milliseconds timeout, std::string command);

  AtEngine* engine_;
  std::chrono::milliseconds timeout_;
  std::string command_;
  bool done_ = false;
};

struct LineStats {
  std::size_t echo = 0;
  std::size_t info = 0;
  std::size_t final = 0;
  std::size_t prompt = 0;
  std::size_t urc = 0;
  std::size_t total() const noexcept { return echo + info + final + prompt + urc; }
};

class AtEngine {
 public:
  struct Options {
    std::set<std::string> urc_prefixes = default_urc_prefixes();
    std::size_t urc_buffer = 1024;
    std::chrono::milliseconds drain_quiet{200};
  };

  explicit AtEngine(std::unique_ptr<ByteChannel> channel);
  AtEngine(std::unique_ptr<ByteChannel> channel, Options options);
  ~AtEngine();
  AtEngine(const AtEngine&) = delete;
  AtEngine& operator=(const AtEngine&) = delete;

  // Callable from any thread; commands run one at a time in FIFO order.
  // Throws Error(timeout) or Error(transport_closed); other outcomes are in the result.
  AtResponse execute(const AtCommand& cmd);

  // Sends a prompt-expecting command and returns once "> " arrived.
  // Throws AtCommandError when a final result arrives instead.
  PayloadExchange begin_payload(const AtCommand& cmd);

  UrcSubscription subscribe_urcs();
  void register_urc_prefix(const std::string& prefix);

  void set_quirk_profile(std::optional<QuirkProfile> profile);
  std::optional<QuirkProfile> quirk_profile() const;

  std::size_t dropped_urcs() const;
  int max_in_flight() const noexcept { return max_in_flight_.load(); }
  LineStats line_stats() const;
  bool closed() const noexcept { return closed_.load(); }
  void close();

 private:
  friend class PayloadExchange;

  struct Pending {
    std::string name;
    std::string sent;  // serialized form without CR, for echo matching
    bool expects_prompt = false;
    bool prompt_seen = false;
    std::vector<AtResponseLine> info;
    std::optional<FinalResult> final;
  };

  void reader_loop();
  void handle_line(std::string line);
  void publish_urc(Urc urc);
  void acquire_slot();
  void release_slot();
  std::optional<AtCommand> prepare(const AtCommand& cmd) const;
  AtResponse wait_final(std::unique_lock<std::mutex>& lk, std::chrono::milliseconds timeout,
                        const std::string& what);
  void drain(std::unique_lock<std::mutex>& lk);

  std::unique_ptr<ByteChannel> channel_;
  Options options_;
  std::shared_ptr<UrcSubscription::Hub> hub_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::optional<Pending> pending_;
  bool draining_ = false;
  LineFramer framer_;
  SteadyTime last_rx_{};
  LineStats stats_;
  std::optional<QuirkProfile> quirks_;

  std::mutex slot_mu_;
  std::condition_variable slot_cv_;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t serving_ = 0;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};

  std::atomic<bool> stop_{false};
  std::atomic<bool> closed_{false};
  std::thread reader_;
};

}  // namespace cellgate::at
