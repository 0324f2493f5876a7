#pragma once

// Hand-rolled generators for the property tests and the acceptance suite.

#include <cstdint>
#include <random>
#include <string>

#include "cellgate/mms/pdu.hpp"
#include "cellgate/sim/oracle_codec.hpp"
#include "cellgate/sms/pdu.hpp"

namespace testsupport::gen {

using Rng = std::mt19937_64;

// Seed from CELLGATE_SEED when set, otherwise `fallback`.
std::uint64_t seed(std::uint64_t fallback);

int uniform(Rng& rng, int lo, int hi);  // inclusive
bool chance(Rng& rng, double p);

// Default-alphabet text costing at most `max_septets` (extension characters cost two).
std::string gsm7_text(Rng& rng, std::size_t max_septets);
// BMP text (a few supplementary characters too) of at most `max_units` UTF-16 units.
std::string ucs2_text(Rng& rng, std::size_t max_units);
std::string ascii_text(Rng& rng, std::size_t min_len, std::size_t max_len);
// "+<digits>" or national digits, 1..20 digits.
std::string phone_number(Rng& rng);

// A SUBMIT that fits one TPDU, optionally with a concatenation header.
cellgate::sms::SmsSubmit sms_submit(Rng& rng);
// A DELIVER description for the independent encoder.
cellgate::sim::oracle::DeliverSpec deliver_spec(Rng& rng);

// A valid PDU of type `t` with every mandatory header and a random choice of optional ones.
cellgate::mms::Pdu mms_pdu(Rng& rng, cellgate::mms::MessageType t);

}  // namespace testsupport::gen
