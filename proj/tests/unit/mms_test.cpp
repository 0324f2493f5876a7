#include <gtest/gtest.h>

#include <deque>
#include <functional>

#include "gen.hpp"
#include "mms_scan.hpp"
#include "cellgate/error.hpp"
#include "cellgate/mms/client.hpp"
#include "cellgate/mms/pdu.hpp"

namespace {

using namespace cellgate;
using namespace cellgate::mms;
namespace scan = testsupport::mms;

Errc decode_error(const Bytes& b) {
  try {
    decode_pdu(b);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode accepted " << to_hex(b);
  return Errc::invalid_argument;
}

Pdu minimal_send_req() {
  Pdu p;
  p.type = MessageType::m_send_req;
  p.headers.transaction_id = "T1";
  p.headers.to = {"+33600000001/TYPE=PLMN"};
  p.body = Body{"text/plain", {Part{"text/plain", std::nullopt, Bytes{'h', 'i'}}}};
  return p;
}

TEST(MmsPdu, SendReqLeadsWithTypeTidVersion) {
  auto bytes = encode_pdu(minimal_send_req());
  ASSERT_GE(bytes.size(), 2u);
  EXPECT_EQ(bytes[0], 0x8C);
  EXPECT_EQ(bytes[1], 0x80);
  auto s = scan::scan(bytes);
  ASSERT_TRUE(s.error.empty()) << s.error;
  EXPECT_TRUE(scan::check_send_req(s).empty());
  EXPECT_EQ(s.text(0x18), "T1");
  EXPECT_EQ(s.short_int(0x0D), 0x12);  // version 1.2
  EXPECT_EQ(s.fields.back().id, 0x04);
}

TEST(MmsPdu, SendReqWithoutFromCarriesInsertAddressToken) {
  auto s = scan::scan(encode_pdu(minimal_send_req()));
  const auto* from = s.find(0x09);
  ASSERT_NE(from, nullptr);
  EXPECT_EQ(from->value, (scan::Bytes{0x01, 0x81}));
}

TEST(MmsPdu, DecodesHandBuiltPdus) {
  auto conf = decode_pdu(scan::send_conf("abc", "mid-9"));
  EXPECT_EQ(conf.type, MessageType::m_send_conf);
  EXPECT_EQ(conf.headers.transaction_id, "abc");
  EXPECT_EQ(conf.headers.message_id, "mid-9");
  EXPECT_EQ(conf.headers.response_status, response_status::ok);

  auto n = decode_pdu(scan::notification_ind("t2", "http://x/y", 0x01020304, 60));
  EXPECT_EQ(n.type, MessageType::m_notification_ind);
  EXPECT_EQ(n.headers.content_location, "http://x/y");
  EXPECT_EQ(n.headers.message_size, 0x01020304u);
  ASSERT_TRUE(n.headers.expiry);
  EXPECT_TRUE(n.headers.expiry->relative);
  EXPECT_EQ(n.headers.expiry->value, 60u);
  EXPECT_EQ(n.headers.message_class, MessageClass::personal);

  auto r = decode_pdu(scan::retrieve_conf("t3", "m3", "+331/TYPE=PLMN", "+332/TYPE=PLMN", "subj", "body text"));
  EXPECT_EQ(r.type, MessageType::m_retrieve_conf);
  EXPECT_EQ(r.headers.from, "+331/TYPE=PLMN");
  EXPECT_EQ(r.headers.subject, "subj");
  ASSERT_TRUE(r.body);
  EXPECT_EQ(r.body->content_type, kMultipartMixed);
  ASSERT_EQ(r.body->parts.size(), 1u);
  EXPECT_EQ(r.body->parts[0].content_type, "text/plain");
  EXPECT_EQ(std::string(r.body->parts[0].data.begin(), r.body->parts[0].data.end()), "body text");

  auto d = decode_pdu(scan::delivery_ind("m4", "+333/TYPE=PLMN", 0x81));
  EXPECT_EQ(d.type, MessageType::m_delivery_ind);
  EXPECT_EQ(d.headers.status, Status::retrieved);
}

TEST(MmsPdu, DecodeErrors) {
  EXPECT_EQ(decode_error({}), Errc::truncated);
  EXPECT_EQ(decode_error({0xFF}), Errc::unknown_message_type);
  EXPECT_EQ(decode_error({0x8C, 0x90}), Errc::unknown_message_type);
  auto cut = encode_pdu(minimal_send_req());
  cut.resize(cut.size() / 2);
  auto code = decode_error(cut);
  EXPECT_TRUE(code == Errc::truncated || code == Errc::decode_failure);
}

TEST(MmsPdu, ValidateNamesMissingHeaders) {
  auto p = minimal_send_req();
  p.headers.transaction_id.reset();
  EXPECT_THROW(encode_pdu(p), Error);
  p = minimal_send_req();
  p.headers.to.clear();
  EXPECT_THROW(encode_pdu(p), Error);
  Pdu n{MessageType::m_notification_ind, {}, std::nullopt};
  n.headers.transaction_id = "x";
  n.headers.content_location = "http://a";
  try {
    validate(n);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_mandatory_header);
  }
  Pdu ack{MessageType::m_acknowledge_ind, {}, Body{"text/plain", {}}};
  ack.headers.transaction_id = "x";
  EXPECT_THROW(validate(ack), Error);
}

TEST(MmsPdu, EverySevenTypesRoundtripOnRandomHeaders) {
  testsupport::gen::Rng rng(testsupport::gen::seed(31));
  for (auto t : kAllMessageTypes) {
    for (int i = 0; i < 200; ++i) {
      auto pdu = testsupport::gen::mms_pdu(rng, t);
      auto bytes = encode_pdu(pdu);
      ASSERT_EQ(decode_pdu(bytes), pdu) << to_string(t) << " " << to_hex(bytes);
      auto s = scan::scan(bytes);
      ASSERT_TRUE(s.error.empty()) << s.error;
      ASSERT_EQ(s.fields[0].id, 0x0C);
      if (pdu.headers.transaction_id) ASSERT_EQ(s.fields[1].id, 0x18);
      if (t == MessageType::m_send_req) ASSERT_TRUE(scan::check_send_req(s).empty());
    }
  }
}

TEST(MmsPdu, RandomBytesOnlyRaiseErrors) {
  testsupport::gen::Rng rng(testsupport::gen::seed(32));
  for (int i = 0; i < 20000; ++i) {
    Bytes b(static_cast<std::size_t>(testsupport::gen::uniform(rng, 0, 80)));
    for (auto& x : b) x = static_cast<std::uint8_t>(testsupport::gen::uniform(rng, 0, 255));
    if (b.size() >= 2 && testsupport::gen::chance(rng, 0.7)) {
      b[0] = 0x8C;
      b[1] = static_cast<std::uint8_t>(testsupport::gen::uniform(rng, 0x80, 0x86));
    }
    try {
      decode_pdu(b);
    } catch (const Error&) {
    }
  }
}

TEST(MmsPdu, MutatedValidPdusOnlyRaiseErrors) {
  testsupport::gen::Rng rng(testsupport::gen::seed(33));
  for (int i = 0; i < 3000; ++i) {
    auto bytes = encode_pdu(testsupport::gen::mms_pdu(rng, kAllMessageTypes[i % 7]));
    int flips = testsupport::gen::uniform(rng, 1, 4);
    for (int k = 0; k < flips && !bytes.empty(); ++k) {
      bytes[static_cast<std::size_t>(testsupport::gen::uniform(rng, 0, static_cast<int>(bytes.size()) - 1))] =
          static_cast<std::uint8_t>(testsupport::gen::uniform(rng, 0, 255));
    }
    try {
      decode_pdu(bytes);
    } catch (const Error&) {
    }
  }
}

TEST(MmsPdu, UintvarEncoding) {
  EXPECT_EQ(encode_uintvar(0), (Bytes{0x00}));
  EXPECT_EQ(encode_uintvar(0x7F), (Bytes{0x7F}));
  EXPECT_EQ(encode_uintvar(0x80), (Bytes{0x81, 0x00}));
  EXPECT_EQ(encode_uintvar(0x3FFF), (Bytes{0xFF, 0x7F}));
}

// Scripted relay: each POST/GET pops the next reply and records the request.
class FakeHttp : public MmsHttp {
 public:
  struct Call {
    std::string method, url;
    Bytes body;
  };
  std::deque<std::function<HttpReply()>> replies;
  std::vector<Call>* calls;

  explicit FakeHttp(std::vector<Call>* c) : calls(c) {}
  HttpReply post(const std::string& url, const Bytes& body) override { return next("POST", url, body); }
  HttpReply get(const std::string& url) override { return next("GET", url, {}); }

 private:
  HttpReply next(const std::string& m, const std::string& url, const Bytes& body) {
    calls->push_back({m, url, body});
    if (replies.empty()) throw Error(Errc::http_failure, "no scripted reply");
    auto f = replies.front();
    replies.pop_front();
    return f();
  }
};

struct ClientRig {
  std::vector<FakeHttp::Call> calls;
  FakeHttp* http = nullptr;
  std::unique_ptr<MmsClient> client;
  std::vector<TxState> seen;

  explicit ClientRig(MmsClient::Options opts = {}) {
    auto h = std::make_unique<FakeHttp>(&calls);
    http = h.get();
    client = std::make_unique<MmsClient>("http://mmsc/", opts, std::move(h));
    client->set_observer([this](const Transaction& t) { seen.push_back(t.state); });
  }
  void reply(int status, Bytes body = {}) {
    http->replies.push_back([=] { return HttpReply{status, body}; });
  }
  void drop() {
    http->replies.push_back([]() -> HttpReply { throw Error(Errc::http_failure, "connection refused"); });
  }
};

Headers to_one() {
  Headers h;
  h.transaction_id = "tx-1";
  h.to = {"+33600000001/TYPE=PLMN"};
  return h;
}
Body text_body() { return Body{"text/plain", {Part{"text/plain", std::nullopt, Bytes{'x'}}}}; }

TEST(MmsClient, SendReachesConfirmed) {
  ClientRig rig;
  rig.reply(200, scan::send_conf("tx-1", "mid-1"));
  EXPECT_EQ(rig.client->send(to_one(), text_body()), "mid-1");
  auto t = rig.client->find("tx-1");
  ASSERT_TRUE(t);
  EXPECT_EQ(t->state, TxState::confirmed);
  EXPECT_EQ(t->message_id, "mid-1");
  EXPECT_EQ(rig.seen, (std::vector<TxState>{TxState::send_req_sent, TxState::confirmed}));
  ASSERT_EQ(rig.calls.size(), 1u);
  EXPECT_TRUE(scan::check_send_req(scan::scan(rig.calls[0].body)).empty());
}

TEST(MmsClient, SendFailures) {
  {
    ClientRig rig;
    rig.reply(200, scan::send_conf("tx-1", "", 0x82));
    try {
      rig.client->send(to_one(), text_body());
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::mmsc_status);
    }
    EXPECT_EQ(rig.client->find("tx-1")->state, TxState::failed);
  }
  {
    ClientRig rig;
    rig.reply(200, scan::send_conf("tx-1", ""));
    EXPECT_THROW(rig.client->send(to_one(), text_body()), Error);
  }
  {
    ClientRig rig;
    rig.reply(200, Bytes{0x01, 0x02});
    try {
      rig.client->send(to_one(), text_body());
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::decode_failure);
    }
  }
}

TEST(MmsClient, RetriesOnceOnTransportFailureAnd5xx) {
  ClientRig rig;
  rig.drop();
  rig.reply(200, scan::send_conf("tx-1", "mid-2"));
  EXPECT_EQ(rig.client->send(to_one(), text_body()), "mid-2");
  EXPECT_EQ(rig.calls.size(), 2u);

  ClientRig twice;
  twice.reply(503);
  twice.reply(502);
  EXPECT_THROW(twice.client->send(to_one(), text_body()), Error);
  EXPECT_EQ(twice.calls.size(), 2u);
}

TEST(MmsClient, NotificationRetrieveAndAcknowledge) {
  ClientRig rig;
  rig.reply(204);
  rig.reply(200, scan::retrieve_conf("rtid", "m1", "+331/TYPE=PLMN", "+332/TYPE=PLMN", "s", "hello"));
  rig.reply(204);
  auto t = rig.client->handle_notification(scan::notification_ind("n1", "http://mmsc/m1", 10, 100));
  ASSERT_TRUE(t);
  EXPECT_EQ(t->state, TxState::acknowledged);
  EXPECT_EQ(rig.seen, (std::vector<TxState>{TxState::notified, TxState::notify_resp_sent, TxState::retrieving,
                                            TxState::retrieved, TxState::acknowledged}));
  ASSERT_EQ(rig.calls.size(), 3u);
  EXPECT_EQ(rig.calls[0].method, "POST");
  auto resp = scan::scan(rig.calls[0].body);
  EXPECT_EQ(resp.short_int(0x0C), 0x03);
  EXPECT_EQ(resp.text(0x18), "n1");
  EXPECT_EQ(resp.short_int(0x15), 0x03);  // deferred
  EXPECT_EQ(rig.calls[1].method, "GET");
  EXPECT_EQ(rig.calls[1].url, "http://mmsc/m1");
  auto ack = scan::scan(rig.calls[2].body);
  EXPECT_EQ(ack.short_int(0x0C), 0x05);
  EXPECT_EQ(ack.text(0x18), "rtid");
  ASSERT_TRUE(t->message);
  EXPECT_EQ(t->message->headers.subject, "s");
}

TEST(MmsClient, NoAcknowledgeWithoutTransactionIdInConf) {
  ClientRig rig;
  rig.reply(204);
  rig.reply(200, scan::retrieve_conf("", "m1", "+331/TYPE=PLMN", "+332/TYPE=PLMN", "s", "x"));
  auto t = rig.client->handle_notification(scan::notification_ind("n2", "http://mmsc/m1", 10, 100));
  ASSERT_TRUE(t);
  EXPECT_EQ(t->state, TxState::retrieved);
  EXPECT_EQ(rig.calls.size(), 2u);
}

TEST(MmsClient, GoneContentAndExpiry) {
  ClientRig rig;
  rig.reply(204);
  rig.reply(404);
  auto t = rig.client->handle_notification(scan::notification_ind("n3", "http://mmsc/gone", 10, 100));
  ASSERT_TRUE(t);
  EXPECT_EQ(t->state, TxState::failed);
  EXPECT_EQ(t->failure, "content-location-gone");

  ClientRig expired;
  auto e = expired.client->handle_notification(scan::notification_ind("n4", "http://mmsc/x", 10, 0));
  ASSERT_TRUE(e);
  EXPECT_EQ(e->state, TxState::failed);
  EXPECT_EQ(e->failure, "expired");
  EXPECT_TRUE(expired.calls.empty());
}

TEST(MmsClient, ManualRetrieveWhenAutoRetrieveIsOff) {
  MmsClient::Options opts;
  opts.auto_retrieve = false;
  ClientRig rig(opts);
  rig.reply(204);
  auto t = rig.client->handle_notification(scan::notification_ind("n5", "http://mmsc/m5", 10, 100));
  EXPECT_EQ(t->state, TxState::notify_resp_sent);
  rig.reply(200, scan::retrieve_conf("", "m5", "+331/TYPE=PLMN", "+332/TYPE=PLMN", "s", "x"));
  EXPECT_EQ(rig.client->retrieve("n5").state, TxState::retrieved);
  EXPECT_THROW(rig.client->retrieve("n5"), Error);
  EXPECT_THROW(rig.client->retrieve("nope"), Error);
}

TEST(MmsClient, DuplicateNotificationIsIdempotent) {
  ClientRig rig;
  rig.reply(204);
  rig.reply(200, scan::retrieve_conf("", "m1", "+331/TYPE=PLMN", "+332/TYPE=PLMN", "s", "x"));
  auto n = scan::notification_ind("n6", "http://mmsc/m6", 10, 100);
  rig.client->handle_notification(n);
  auto again = rig.client->handle_notification(n);
  EXPECT_EQ(again->state, TxState::retrieved);
  EXPECT_EQ(rig.calls.size(), 2u);
  EXPECT_FALSE(rig.client->handle_notification(scan::send_conf("x", "y")));
}

TEST(MmsClient, DeliveryReportCorrelatesToSend) {
  ClientRig rig;
  rig.reply(200, scan::send_conf("tx-1", "mid-7"));
  rig.client->send(to_one(), text_body());
  auto rep = rig.client->handle_delivery_ind(scan::delivery_ind("mid-7", "+33600000001/TYPE=PLMN", 0x81));
  ASSERT_TRUE(rep);
  EXPECT_EQ(rep->transaction_id, "tx-1");
  EXPECT_EQ(rep->status, Status::retrieved);
  auto other = rig.client->handle_delivery_ind(scan::delivery_ind("mid-x", "+3/TYPE=PLMN", 0x82));
  ASSERT_TRUE(other);
  EXPECT_FALSE(other->transaction_id);
}

}  // namespace
