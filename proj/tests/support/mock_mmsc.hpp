#pragma once

// An MMS relay on localhost. It checks every m-send-req against the mandatory header
// rules and answers with hand-built PDUs.

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "mms_scan.hpp"

namespace testsupport {

class MockMmsc {
 public:
  MockMmsc();
  ~MockMmsc();

  std::string url() const;  // POST endpoint
  std::string base() const;
  // Serves `pdu` on GET <base>/<name> and returns the full content location.
  std::string host_message(const std::string& name, mms::Bytes pdu);

  struct Post {
    mms::Bytes body;
    std::string content_type;
    mms::Scan scan;
    std::vector<std::string> problems;  // send_req conformance findings
  };
  std::vector<Post> posts() const;
  // Posts whose first header is the given message type octet.
  std::vector<Post> posts_of(std::uint8_t type) const;
  int gets() const { return gets_; }
  // Every request in arrival order: "POST 80", "POST 83", "GET name", ...
  std::vector<std::string> log() const;
  // Message id placed in the next send_conf replies.
  void set_message_id(std::string id);
  void set_send_status(std::uint8_t status);

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mu_;
  std::vector<Post> posts_;
  std::map<std::string, mms::Bytes> hosted_;
  std::vector<std::string> log_;
  std::string message_id_ = "mid-0001";
  std::uint8_t send_status_ = 0x80;
  std::atomic<int> gets_{0};
};

}  // namespace testsupport
