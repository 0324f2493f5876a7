#include "cellgate/at/engine.hpp"

#include <spdlog/spdlog.h>

#include <list>

namespace cellgate::at {

std::vector<std::string> AtResponse::values(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& l : info) {
    if (l.prefix == prefix) out.push_back(l.raw_values);
  }
  return out;
}

std::string AtResponse::value(std::string_view prefix) const {
  for (const auto& l : info) {
    if (l.prefix == prefix) return l.raw_values;
  }
  return {};
}

AtCommandError::AtCommandError(std::string command, FinalResult final)
    : Error(Errc::command_failed,
            command + " failed: " + (final.text.empty() ? std::string(to_string(final.kind)) : final.text)),
      command_(std::move(command)),
      final_(std::move(final)) {}

const AtResponse& expect_ok(const AtResponse& r, std::string_view command) {
  if (!r.ok()) {
    FinalResult f = r.final;
    if (r.unsupported) f = FinalResult{FinalResult::Kind::error, 0, "unsupported by quirk profile"};
    throw AtCommandError(std::string(command), f);
  }
  return r;
}

// ---- URC fan-out --------------------------------------------------------

struct UrcSubscription::Queue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Urc> items;
  std::size_t dropped = 0;
};

struct UrcSubscription::Hub {
  std::mutex mu;
  std::size_t capacity = 1024;
  std::list<std::weak_ptr<Queue>> subscribers;
  std::deque<Urc> backlog;
  std::size_t dropped = 0;

  static void push_bounded(std::deque<Urc>& q, Urc urc, std::size_t cap, std::size_t& dropped) {
    if (q.size() >= cap) {
      q.pop_front();
      ++dropped;
    }
    q.push_back(std::move(urc));
  }

  void publish(Urc urc) {
    std::lock_guard lk(mu);
    bool delivered = false;
    for (auto it = subscribers.begin(); it != subscribers.end();) {
      auto q = it->lock();
      if (!q) {
        it = subscribers.erase(it);
        continue;
      }
      {
        std::lock_guard ql(q->mu);
        push_bounded(q->items, urc, capacity, q->dropped);
      }
      q->cv.notify_all();
      delivered = true;
      ++it;
    }
    if (!delivered) push_bounded(backlog, std::move(urc), capacity, dropped);
  }

  std::shared_ptr<Queue> add() {
    auto q = std::make_shared<Queue>();
    std::lock_guard lk(mu);
    q->items = std::move(backlog);
    backlog.clear();
    subscribers.push_back(q);
    return q;
  }

  void remove(const std::shared_ptr<Queue>& q) {
    std::lock_guard lk(mu);
    subscribers.remove_if([&](const std::weak_ptr<Queue>& w) {
      auto s = w.lock();
      return !s || s == q;
    });
  }
};

UrcSubscription::UrcSubscription(std::shared_ptr<Hub> hub, std::shared_ptr<Queue> queue)
    : hub_(std::move(hub)), queue_(std::move(queue)) {}

UrcSubscription::~UrcSubscription() {
  if (hub_ && queue_) hub_->remove(queue_);
}

std::optional<Urc> UrcSubscription::next(std::chrono::milliseconds timeout) {
  std::unique_lock lk(queue_->mu);
  if (!queue_->cv.wait_for(lk, timeout, [&] { return !queue_->items.empty(); })) return std::nullopt;
  Urc u = std::move(queue_->items.front());
  queue_->items.pop_front();
  return u;
}

std::size_t UrcSubscription::dropped() const {
  std::lock_guard lk(queue_->mu);
  return queue_->dropped;
}

// ---- payload exchange ---------------------------------------------------

PayloadExchange::PayloadExchange(AtEngine* engine, std::chrono::milliseconds timeout, std::string command)
    : engine_(engine), timeout_(timeout), command_(std::move(command)) {}

PayloadExchange::PayloadExchange(PayloadExchange&& other) noexcept
    : engine_(other.engine_), timeout_(other.timeout_), command_(std::move(other.command_)), done_(other.done_) {
  other.done_ = true;
  other.engine_ = nullptr;
}

PayloadExchange::~PayloadExchange() {
  if (done_ || engine_ == nullptr) return;
  try {
    send("\x1B");
  } catch (const std::exception& e) {
    spdlog::warn("cancelling {} failed: {}", command_, e.what());
  }
}

AtResponse PayloadExchange::send(std::string_view body) {
  if (done_) fail(Errc::invalid_state, "payload already sent");
  if (body.empty()) fail(Errc::invalid_argument, "payload must not be empty");
  bool abort = body == "\x1B";
  if (!abort && body.find_first_of("\x1A\x1B") != std::string_view::npos) {
    fail(Errc::invalid_argument, "payload must not contain Ctrl-Z or ESC");
  }
  done_ = true;
  auto* eng = engine_;
  struct Release {
    AtEngine* e;
    ~Release() { e->release_slot(); }
  } release{eng};

  std::unique_lock lk(eng->mu_);
  if (!eng->pending_) fail(Errc::invalid_state, "no prompt outstanding");
  lk.unlock();
  try {
    eng->channel_->write(abort ? std::string("\x1B") : std::string(body) + "\x1A");
  } catch (const Error&) {
    lk.lock();
    eng->pending_.reset();
    throw;
  }
  lk.lock();
  auto r = eng->wait_final(lk, timeout_, command_);
  r.aborted = abort;
  return r;
}

// ---- engine -------------------------------------------------------------

AtEngine::AtEngine(std::unique_ptr<ByteChannel> channel) : AtEngine(std::move(channel), Options{}) {}

AtEngine::AtEngine(std::unique_ptr<ByteChannel> channel, Options options)
    : channel_(std::move(channel)),
      options_(std::move(options)),
      hub_(std::make_shared<UrcSubscription::Hub>()) {
  hub_->capacity = options_.urc_buffer;
  last_rx_ = std::chrono::steady_clock::now();
  reader_ = std::thread([this] { reader_loop(); });
}

AtEngine::~AtEngine() { close(); }

void AtEngine::close() {
  stop_ = true;
  if (channel_) channel_->close();
  if (reader_.joinable() && reader_.get_id() != std::this_thread::get_id()) reader_.join();
  closed_ = true;
  cv_.notify_all();
}

void AtEngine::reader_loop() {
  std::array<char, 4096> buf{};
  while (!stop_) {
    std::size_t n = 0;
    try {
      n = channel_->read(buf, std::chrono::milliseconds(50));
    } catch (const Error&) {
      break;
    }
    if (n == 0) continue;
    std::lock_guard lk(mu_);
    last_rx_ = std::chrono::steady_clock::now();
    for (auto& line : framer_.push(std::string_view(buf.data(), n))) handle_line(std::move(line));
  }
  closed_ = true;
  std::lock_guard lk(mu_);
  cv_.notify_all();
}

void AtEngine::publish_urc(Urc urc) {
  ++stats_.urc;
  hub_->publish(std::move(urc));
}

// Called with mu_ held.
void AtEngine::handle_line(std::string raw) {
  auto parsed = parse_line(raw, options_.urc_prefixes);
  if (auto* urc = std::get_if<Urc>(&parsed)) {
    // A command's own information response can share a URC prefix (+CLIP, +CREG),
    // and the +CLAC listing names URC-bearing commands on bare lines.
    if (pending_ && !draining_ && (pending_->name == urc->prefix || pending_->name == "+CLAC")) {
      auto as_info = std::get<AtResponseLine>(parse_line(raw, {}));
      ++stats_.info;
      pending_->info.push_back(std::move(as_info));
      return;
    }
    publish_urc(std::move(*urc));
    return;
  }
  auto& line = std::get<AtResponseLine>(parsed);
  using K = AtResponseLine::Kind;
  if (draining_ || !pending_) {
    switch (line.kind) {
      case K::final: {
        auto k = line.result.kind;
        if (!draining_ && (k == FinalResult::Kind::no_carrier || k == FinalResult::Kind::busy ||
                           k == FinalResult::Kind::no_answer)) {
          publish_urc(Urc{line.text, "", std::chrono::steady_clock::now()});
        } else {
          ++stats_.final;
        }
        return;
      }
      case K::info:
        if (!draining_) {
          publish_urc(Urc{"?", line.text, std::chrono::steady_clock::now()});
        } else {
          ++stats_.info;
        }
        return;
      case K::echo: ++stats_.echo; return;
      case K::prompt: ++stats_.prompt; return;
      case K::empty: return;
    }
    return;
  }
  switch (line.kind) {
    case K::echo:
      ++stats_.echo;
      if (line.text != pending_->sent) {
        line.kind = K::info;
        line.raw_values = line.text;
        pending_->info.push_back(std::move(line));
      }
      return;
    case K::prompt:
      ++stats_.prompt;
      if (pending_->expects_prompt) {
        pending_->prompt_seen = true;
        framer_.set_prompt_armed(false);
        cv_.notify_all();
      }
      return;
    case K::final:
      ++stats_.final;
      pending_->final = line.result;
      framer_.set_prompt_armed(false);
      cv_.notify_all();
      return;
    case K::info:
      ++stats_.info;
      pending_->info.push_back(std::move(line));
      return;
    case K::empty: return;
  }
}

void AtEngine::acquire_slot() {
  std::unique_lock lk(slot_mu_);
  auto ticket = next_ticket_++;
  slot_cv_.wait(lk, [&] { return serving_ == ticket; });
  int now = ++in_flight_;
  int prev = max_in_flight_.load();
  while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
  }
}

void AtEngine::release_slot() {
  --in_flight_;
  std::lock_guard lk(slot_mu_);
  ++serving_;
  slot_cv_.notify_all();
}

std::optional<AtCommand> AtEngine::prepare(const AtCommand& cmd) const {
  std::lock_guard lk(mu_);
  if (!quirks_) return cmd;
  return quirks_->apply(cmd);
}

void AtEngine::drain(std::unique_lock<std::mutex>& lk) {
  draining_ = true;
  framer_.set_prompt_armed(false);
  while (!closed_) {
    auto quiet_until = last_rx_ + options_.drain_quiet;
    if (std::chrono::steady_clock::now() >= quiet_until) break;
    cv_.wait_until(lk, quiet_until);
  }
  draining_ = false;
}

AtResponse AtEngine::wait_final(std::unique_lock<std::mutex>& lk, std::chrono::milliseconds timeout,
                                const std::string& what) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  cv_.wait_until(lk, deadline, [&] { return closed_.load() || (pending_ && pending_->final); });
  if (pending_ && pending_->final) {
    AtResponse r;
    r.info = std::move(pending_->info);
    r.final = std::move(*pending_->final);
    pending_.reset();
    return r;
  }
  pending_.reset();
  if (closed_) fail(Errc::transport_closed, what + ": transport closed");
  drain(lk);
  fail(Errc::timeout, what + ": no final result within " + std::to_string(timeout.count()) + " ms");
}

AtResponse AtEngine::execute(const AtCommand& cmd) {
  if (cmd.expects_prompt) fail(Errc::invalid_argument, "use begin_payload for " + cmd.name);
  auto prepared = prepare(cmd);
  if (!prepared) {
    AtResponse r;
    r.unsupported = true;
    r.final = FinalResult{FinalResult::Kind::error, 0, "ERROR"};
    return r;
  }
  auto wire = serialize(*prepared);
  acquire_slot();
  struct Release {
    AtEngine* e;
    ~Release() { e->release_slot(); }
  } release{this};

  std::unique_lock lk(mu_);
  if (closed_) fail(Errc::transport_closed, "engine closed");
  pending_ = Pending{prepared->name, wire.substr(0, wire.size() - 1), false, false, {}, std::nullopt};
  lk.unlock();
  try {
    channel_->write(wire);
  } catch (const Error&) {
    lk.lock();
    pending_.reset();
    throw;
  }
  lk.lock();
  return wait_final(lk, prepared->timeout, "AT" + prepared->name);
}

PayloadExchange AtEngine::begin_payload(const AtCommand& cmd) {
  auto prepared = prepare(cmd);
  if (!prepared) {
    throw AtCommandError("AT" + cmd.name, FinalResult{FinalResult::Kind::error, 0, "unsupported by quirk profile"});
  }
  auto wire = serialize(*prepared);
  acquire_slot();
  bool keep_slot = false;
  struct Release {
    AtEngine* e;
    bool& keep;
    ~Release() {
      if (!keep) e->release_slot();
    }
  } release{this, keep_slot};

  std::unique_lock lk(mu_);
  if (closed_) fail(Errc::transport_closed, "engine closed");
  pending_ = Pending{prepared->name, wire.substr(0, wire.size() - 1), true, false, {}, std::nullopt};
  framer_.set_prompt_armed(true);
  lk.unlock();
  try {
    channel_->write(wire);
  } catch (const Error&) {
    lk.lock();
    pending_.reset();
    throw;
  }
  lk.lock();
  auto deadline = std::chrono::steady_clock::now() + prepared->timeout;
  cv_.wait_until(lk, deadline, [&] {
    return closed_.load() || (pending_ && (pending_->prompt_seen || pending_->final));
  });
  if (pending_ && pending_->final) {
    auto final = std::move(*pending_->final);
    pending_.reset();
    throw AtCommandError("AT" + prepared->name, std::move(final));
  }
  if (pending_ && pending_->prompt_seen) {
    keep_slot = true;
    return PayloadExchange(this, prepared->timeout, "AT" + prepared->name);
  }
  pending_.reset();
  if (closed_) fail(Errc::transport_closed, "engine closed");
  drain(lk);
  fail(Errc::prompt_never_arrived, "AT" + prepared->name + ": prompt never arrived");
}

UrcSubscription AtEngine::subscribe_urcs() { return UrcSubscription(hub_, hub_->add()); }

void AtEngine::register_urc_prefix(const std::string& prefix) {
  std::lock_guard lk(mu_);
  options_.urc_prefixes.insert(prefix);
}

void AtEngine::set_quirk_profile(std::optional<QuirkProfile> profile) {
  std::lock_guard lk(mu_);
  quirks_ = std::move(profile);
}

std::optional<QuirkProfile> AtEngine::quirk_profile() const {
  std::lock_guard lk(mu_);
  return quirks_;
}

std::size_t AtEngine::dropped_urcs() const {
  std::lock_guard lk(hub_->mu);
  return hub_->dropped;
}

LineStats AtEngine::line_stats() const {
  std::lock_guard lk(mu_);
  return stats_;
}

}  // namespace cellgate::at
