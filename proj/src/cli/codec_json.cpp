#include "cellgate/cli/codec_json.hpp"

#include "cellgate/error.hpp"
#include "cellgate/util.hpp"

namespace cellgate::cli {

using nlohmann::json;

namespace {

void put_user_data(json& j, sms::Alphabet a, const std::string& ud) {
  if (a == sms::Alphabet::octet) {
    j["data_hex"] = to_hex(std::span(reinterpret_cast<const std::uint8_t*>(ud.data()), ud.size()));
  } else {
    j["text"] = ud;
  }
}

void put_concat(json& j, const std::optional<sms::ConcatHeader>& c) {
  if (c) j["concat"] = {{"ref", c->ref}, {"total", c->total}, {"seq", c->seq}};
}

}  // namespace

json to_json(const sms::SmsSubmit& m) {
  json j = {{"type", "submit"},
            {"message_ref", m.message_ref},
            {"to", m.destination.to_string()},
            {"pid", m.pid},
            {"alphabet", sms::to_string(m.dcs)}};
  if (m.validity_relative) j["validity_relative"] = *m.validity_relative;
  put_user_data(j, m.dcs, m.user_data);
  put_concat(j, m.udh);
  return j;
}

json to_json(const sms::SmsDeliver& m) {
  json j = {{"type", "deliver"},
            {"from", m.originator.to_string()},
            {"pid", m.pid},
            {"alphabet", sms::to_string(m.dcs)},
            {"timestamp", m.timestamp.to_iso8601()},
            {"tz_quarters", m.timestamp.tz_quarters}};
  put_user_data(j, m.dcs, m.user_data);
  put_concat(j, m.udh);
  return j;
}

sms::SmsSubmit submit_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::invalid_argument, "submit must be an object");
  sms::SmsSubmit m;
  try {
    if (j.value("type", std::string("submit")) != "submit") fail(Errc::invalid_argument, "only submit can be encoded");
    m.message_ref = j.value("message_ref", std::uint8_t{0});
    m.destination = sms::Address::parse(j.at("to").get<std::string>());
    m.pid = j.value("pid", std::uint8_t{0});
    if (j.contains("data_hex")) {
      auto bytes = from_hex(j.at("data_hex").get<std::string>());
      m.user_data.assign(bytes.begin(), bytes.end());
      m.dcs = sms::Alphabet::octet;
    } else {
      m.user_data = j.value("text", std::string());
      m.dcs = sms::choose_alphabet(m.user_data);
    }
    if (j.contains("alphabet")) m.dcs = sms::alphabet_from_string(j.at("alphabet").get<std::string>());
    if (j.contains("validity_relative")) m.validity_relative = j.at("validity_relative").get<std::uint8_t>();
    if (j.contains("concat")) {
      const auto& c = j.at("concat");
      m.udh = sms::ConcatHeader{c.at("ref").get<std::uint16_t>(), c.at("total").get<std::uint8_t>(),
                                c.at("seq").get<std::uint8_t>()};
    }
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, std::string("submit: ") + e.what());
  }
  return m;
}

json to_json(const mms::Pdu& pdu) {
  const auto& h = pdu.headers;
  json j = {{"type", mms::to_string(pdu.type)},
            {"version", std::to_string(h.version.major) + "." + std::to_string(h.version.minor)}};
  if (h.transaction_id) j["transaction_id"] = *h.transaction_id;
  if (h.message_id) j["message_id"] = *h.message_id;
  if (h.from) j["from"] = *h.from;
  if (!h.to.empty()) j["to"] = h.to;
  if (!h.cc.empty()) j["cc"] = h.cc;
  if (h.subject) j["subject"] = *h.subject;
  if (h.message_class) j["message_class"] = mms::to_string(*h.message_class);
  if (h.expiry) j["expiry"] = {{"relative", h.expiry->relative}, {"value", h.expiry->value}};
  if (h.content_location) j["content_location"] = *h.content_location;
  if (h.status) j["status"] = mms::to_string(*h.status);
  if (h.response_status) j["response_status"] = *h.response_status;
  if (h.response_text) j["response_text"] = *h.response_text;
  if (h.date) j["date"] = *h.date;
  if (h.message_size) j["message_size"] = *h.message_size;
  if (h.delivery_report) j["delivery_report"] = *h.delivery_report;
  if (h.report_allowed) j["report_allowed"] = *h.report_allowed;
  if (!h.unknown.empty()) {
    json u = json::array();
    for (const auto& [field, value] : h.unknown) u.push_back({{"field", field}, {"value_hex", to_hex(value)}});
    j["unknown"] = u;
  }
  if (pdu.body) {
    json parts = json::array();
    for (const auto& p : pdu.body->parts) {
      json pj = {{"content_type", p.content_type}, {"data", base64_encode(p.data)}};
      if (p.content_id) pj["content_id"] = *p.content_id;
      parts.push_back(pj);
    }
    j["body"] = {{"content_type", pdu.body->content_type}, {"parts", parts}};
  }
  return j;
}

mms::Pdu mms_pdu_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::invalid_argument, "MMS PDU must be an object");
  mms::Pdu pdu;
  auto& h = pdu.headers;
  try {
    pdu.type = mms::message_type_from_string(j.at("type").get<std::string>());
    if (j.contains("version")) {
      auto v = split(j.at("version").get<std::string>(), '.');
      if (v.size() != 2) fail(Errc::invalid_argument, "version must be major.minor");
      h.version = {static_cast<int>(parse_int(v[0]).value_or(1)), static_cast<int>(parse_int(v[1]).value_or(0))};
    }
    auto opt_str = [&](const char* key, std::optional<std::string>& out) {
      if (j.contains(key)) out = j.at(key).get<std::string>();
    };
    opt_str("transaction_id", h.transaction_id);
    opt_str("message_id", h.message_id);
    opt_str("from", h.from);
    opt_str("subject", h.subject);
    opt_str("content_location", h.content_location);
    opt_str("response_text", h.response_text);
    if (j.contains("to")) h.to = j.at("to").get<std::vector<std::string>>();
    if (j.contains("cc")) h.cc = j.at("cc").get<std::vector<std::string>>();
    if (j.contains("message_class")) h.message_class = mms::message_class_from_string(j.at("message_class").get<std::string>());
    if (j.contains("expiry")) {
      h.expiry = mms::Expiry{j.at("expiry").at("relative").get<bool>(), j.at("expiry").at("value").get<std::uint64_t>()};
    }
    if (j.contains("status")) h.status = mms::status_from_string(j.at("status").get<std::string>());
    if (j.contains("response_status")) h.response_status = j.at("response_status").get<std::uint8_t>();
    if (j.contains("date")) h.date = j.at("date").get<std::uint64_t>();
    if (j.contains("message_size")) h.message_size = j.at("message_size").get<std::uint64_t>();
    if (j.contains("delivery_report")) h.delivery_report = j.at("delivery_report").get<bool>();
    if (j.contains("report_allowed")) h.report_allowed = j.at("report_allowed").get<bool>();
    for (const auto& u : j.value("unknown", json::array())) {
      h.unknown.emplace_back(u.at("field").get<std::uint8_t>(), from_hex(u.at("value_hex").get<std::string>()));
    }
    if (j.contains("body")) {
      mms::Body b;
      b.content_type = j.at("body").at("content_type").get<std::string>();
      for (const auto& pj : j.at("body").at("parts")) {
        mms::Part p;
        p.content_type = pj.at("content_type").get<std::string>();
        if (pj.contains("content_id")) p.content_id = pj.at("content_id").get<std::string>();
        if (pj.contains("text")) {
          auto t = pj.at("text").get<std::string>();
          p.data.assign(t.begin(), t.end());
        } else {
          p.data = base64_decode(pj.value("data", std::string()));
        }
        b.parts.push_back(std::move(p));
      }
      pdu.body = std::move(b);
    }
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, std::string("MMS PDU: ") + e.what());
  }
  return pdu;
}

}  // namespace cellgate::cli
