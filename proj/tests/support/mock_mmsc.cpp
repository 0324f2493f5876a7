#include "mock_mmsc.hpp"

#include <cstdio>

namespace testsupport {

MockMmsc::MockMmsc() {
  server_.Post("/mms", [this](const httplib::Request& req, httplib::Response& res) {
    Post p;
    p.body.assign(req.body.begin(), req.body.end());
    p.content_type = req.get_header_value("Content-Type");
    p.scan = mms::scan(p.body);
    bool is_send = !p.body.empty() && p.body.size() >= 2 && p.body[0] == 0x8C && p.body[1] == 0x80;
    if (is_send) {
      p.problems = mms::check_send_req(p.scan);
      if (p.content_type != "application/vnd.wap.mms-message") p.problems.push_back("HTTP Content-Type is " + p.content_type);
    }
    std::string tid = p.scan.text(0x18).value_or("");
    std::string mid;
    std::uint8_t status;
    bool conformant = p.problems.empty();
    {
      std::lock_guard lock(mu_);
      posts_.push_back(p);
      char type[8];
      std::snprintf(type, sizeof type, "%02X", p.body.size() >= 2 ? p.body[1] : 0);
      log_.push_back(std::string("POST ") + type);
      mid = message_id_;
      status = send_status_;
    }
    if (!is_send) {
      res.status = 204;
      return;
    }
    if (!conformant) status = 0x83;  // message format corrupt
    auto conf = mms::send_conf(tid, status == 0x80 ? mid : std::string(), status);
    res.set_content(std::string(conf.begin(), conf.end()), "application/vnd.wap.mms-message");
  });
  server_.Get(R"(/msg/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    ++gets_;
    std::lock_guard lock(mu_);
    log_.push_back("GET " + std::string(req.matches[1]));
    auto it = hosted_.find(req.matches[1]);
    if (it == hosted_.end()) {
      res.status = 404;
      return;
    }
    res.set_content(std::string(it->second.begin(), it->second.end()), "application/vnd.wap.mms-message");
  });
  port_ = server_.bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
}

MockMmsc::~MockMmsc() {
  server_.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockMmsc::base() const { return "http://127.0.0.1:" + std::to_string(port_); }
std::string MockMmsc::url() const { return base() + "/mms"; }

std::string MockMmsc::host_message(const std::string& name, mms::Bytes pdu) {
  std::lock_guard lock(mu_);
  hosted_[name] = std::move(pdu);
  return base() + "/msg/" + name;
}

std::vector<MockMmsc::Post> MockMmsc::posts() const {
  std::lock_guard lock(mu_);
  return posts_;
}

std::vector<MockMmsc::Post> MockMmsc::posts_of(std::uint8_t type) const {
  std::vector<Post> out;
  for (auto& p : posts()) {
    if (p.body.size() >= 2 && p.body[0] == 0x8C && p.body[1] == type) out.push_back(p);
  }
  return out;
}

std::vector<std::string> MockMmsc::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

void MockMmsc::set_message_id(std::string id) {
  std::lock_guard lock(mu_);
  message_id_ = std::move(id);
}

void MockMmsc::set_send_status(std::uint8_t status) {
  std::lock_guard lock(mu_);
  send_status_ = status;
}

}  // namespace testsupport
