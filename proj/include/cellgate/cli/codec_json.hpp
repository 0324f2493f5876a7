#pragma once

#include "json.hpp"
#include "cellgate/mms/pdu.hpp"
#include "cellgate/sms/pdu.hpp"

// JSON forms used by the offline codec verbs. from_json(to_json(x)) == x.
namespace cellgate::cli {

// {type:"submit", message_ref, to, pid, alphabet, validity_relative?, text | data_hex, concat?}
nlohmann::json to_json(const sms::SmsSubmit& m);
// {type:"deliver", from, pid, alphabet, timestamp, tz_quarters, text | data_hex, concat?}
nlohmann::json to_json(const sms::SmsDeliver& m);
// Missing fields take the codec defaults; the alphabet is chosen from the text when absent.
sms::SmsSubmit submit_from_json(const nlohmann::json& j);

nlohmann::json to_json(const mms::Pdu& pdu);
mms::Pdu mms_pdu_from_json(const nlohmann::json& j);

}  // namespace cellgate::cli
