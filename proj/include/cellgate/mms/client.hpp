#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cellgate/clock.hpp"
#include "cellgate/mms/pdu.hpp"

namespace cellgate::mms {

enum class TxState {
  idle,
  send_req_sent,
  confirmed,
  failed,
  notified,
  notify_resp_sent,
  retrieving,
  retrieved,
  acknowledged,
};
enum class Direction { send, receive };

std::string_view to_string(TxState s) noexcept;
std::string_view to_string(Direction d) noexcept;

struct Transition {
  TxState state;
  SteadyTime at;
};

struct Transaction {
  std::string id;  // X-Mms-Transaction-ID
  Direction direction = Direction::send;
  TxState state = TxState::idle;
  std::string failure;  // set once state == failed
  std::optional<std::string> message_id;
  std::optional<std::string> content_location;
  std::optional<Pdu> message;  // the m-send-req sent, or the m-retrieve-conf received
  std::vector<Transition> history;

  bool terminal() const noexcept;
};

struct HttpReply {
  int status = 0;
  Bytes body;
};

// One HTTP leg towards the MMSC. Throws Error(http_failure) when no reply arrives.
class MmsHttp {
 public:
  virtual ~MmsHttp() = default;
  virtual HttpReply post(const std::string& url, const Bytes& body) = 0;
  virtual HttpReply get(const std::string& url) = 0;
};

std::unique_ptr<MmsHttp> make_http(std::chrono::milliseconds timeout);

struct DeliveryReport {
  std::string message_id;
  Status status = Status::indeterminate;
  std::vector<std::string> to;
  std::optional<std::string> transaction_id;  // set when correlated to a send
};

class MmsClient {
 public:
  struct Options {
    bool auto_retrieve = true;
    std::chrono::milliseconds timeout{5000};
    int retries = 1;
  };
  using Observer = std::function<void(const Transaction&)>;

  MmsClient(std::string mmsc_url, Options options);
  MmsClient(std::string mmsc_url, Options options, std::unique_ptr<MmsHttp> http);

  // Posts an m-send-req and returns the message id from the conf. The transaction id
  // is generated when `headers` carries none.
  // Throws Error(http_failure / mmsc_status / decode_failure); the transaction ends failed.
  std::string send(Headers headers, Body body);

  // Ingests an m-notification-ind. Returns nullopt when it does not decode.
  std::optional<Transaction> handle_notification(std::span<const std::uint8_t> pdu);
  // Fetches the message of a notified transaction.
  Transaction retrieve(const std::string& transaction_id);
  std::optional<DeliveryReport> handle_delivery_ind(std::span<const std::uint8_t> pdu);

  std::optional<Transaction> find(const std::string& transaction_id) const;
  std::vector<Transaction> list() const;
  // Called after every state change, outside the client lock.
  void set_observer(Observer observer);
  const std::string& mmsc_url() const noexcept { return url_; }

 private:
  HttpReply with_retry(const std::function<HttpReply()>& leg);
  void move_to(const std::string& id, TxState state, const std::string& failure = {});
  Transaction snapshot(const std::string& id) const;
  std::string new_transaction_id();

  std::string url_;
  Options options_;
  std::unique_ptr<MmsHttp> http_;
  mutable std::mutex mu_;
  std::map<std::string, Transaction> tx_;
  std::map<std::string, std::string> by_message_id_;
  Observer observer_;
};

}  // namespace cellgate::mms
