#include <gtest/gtest.h>

#include "gen.hpp"
#include "cellgate/error.hpp"
#include "cellgate/sim/oracle_codec.hpp"
#include "cellgate/sms/gsm7.hpp"
#include "cellgate/sms/pdu.hpp"

namespace {

namespace sms = cellgate::sms;
namespace oracle = cellgate::sim::oracle;
using cellgate::to_hex;

TEST(Gsm7, FrozenHelloHello) {
  auto packed = sms::pack_gsm7("hellohello");
  EXPECT_EQ(packed.septets, 10u);
  EXPECT_EQ(to_hex(packed.bytes), "E8329BFD4697D9EC37");
  EXPECT_EQ(to_hex(oracle::pack_text("hellohello")), "E8329BFD4697D9EC37");
  EXPECT_EQ(sms::unpack_gsm7(packed.bytes, packed.septets), "hellohello");
}

TEST(SemiOctets, FrozenVectors) {
  EXPECT_EQ(to_hex(sms::encode_semi_octets("123")), "21F3");
  EXPECT_EQ(to_hex(sms::encode_semi_octets("13374242")), "31732424");
  auto b = cellgate::from_hex("21F3");
  EXPECT_EQ(sms::decode_semi_octets(b, 3), "123");
}

TEST(Gsm7, ExtensionCharactersCostTwo) {
  EXPECT_EQ(sms::to_gsm7_septets("€").size(), 2u);
  EXPECT_EQ(sms::to_gsm7_septets("[a]").size(), 5u);
  EXPECT_EQ(sms::gsm7_cost(U'{'), 2);
  EXPECT_EQ(sms::gsm7_cost(U'a'), 1);
  EXPECT_FALSE(sms::gsm7_cost(U'✓'));
  EXPECT_THROW(sms::to_gsm7_septets("✓"), cellgate::Error);
}

TEST(Gsm7, UnpackRejectsWrongLength) {
  auto packed = sms::pack_gsm7("abc");
  EXPECT_THROW(sms::unpack_gsm7(packed.bytes, 9), cellgate::Error);
}

TEST(Gsm7, PackingMatchesOracleOnRandomText) {
  testsupport::gen::Rng rng(testsupport::gen::seed(11));
  for (int i = 0; i < 500; ++i) {
    auto text = testsupport::gen::gsm7_text(rng, 160);
    ASSERT_EQ(to_hex(sms::pack_gsm7(text).bytes), to_hex(oracle::pack_text(text))) << text;
    ASSERT_EQ(sms::is_gsm7(text), oracle::fits_gsm7(text));
  }
}

TEST(Gsm7, PackUnpackIsIdentityAtEveryBitOffset) {
  testsupport::gen::Rng rng(testsupport::gen::seed(12));
  for (int i = 0; i < 300; ++i) {
    std::vector<std::uint8_t> septets(static_cast<std::size_t>(testsupport::gen::uniform(rng, 0, 160)));
    for (auto& s : septets) s = static_cast<std::uint8_t>(testsupport::gen::uniform(rng, 0, 127));
    std::size_t offset = static_cast<std::size_t>(testsupport::gen::uniform(rng, 0, 6));
    auto packed = sms::pack_septets(septets, offset);
    EXPECT_EQ(sms::unpack_septets(packed, septets.size(), offset), septets);
  }
}

TEST(SmsSubmit, RandomRoundtripAndOracleAgreement) {
  testsupport::gen::Rng rng(testsupport::gen::seed(13));
  for (int i = 0; i < 1000; ++i) {
    auto m = testsupport::gen::sms_submit(rng);
    auto enc = sms::encode_submit(m);
    ASSERT_EQ(sms::decode_submit(enc.hex), m) << enc.hex;
    auto v = oracle::decode_submit(enc.hex);
    ASSERT_EQ(v.destination, m.destination.to_string());
    ASSERT_EQ(v.text, m.user_data);
    ASSERT_EQ(v.tpdu_len, static_cast<int>(enc.tpdu_len));
    ASSERT_LE(enc.tpdu_len, sms::kMaxTpduOctets);
    ASSERT_EQ(enc.hex.substr(0, 2), "00");
    ASSERT_EQ(enc.hex.size(), 2 + 2 * enc.tpdu_len);
  }
}

TEST(SmsDeliver, OracleEncodedMessagesDecode) {
  testsupport::gen::Rng rng(testsupport::gen::seed(14));
  for (int i = 0; i < 1000; ++i) {
    auto d = testsupport::gen::deliver_spec(rng);
    auto hex = oracle::encode_deliver(d);
    auto got = sms::decode_deliver(hex);
    ASSERT_EQ(got.user_data, d.text) << hex;
    ASSERT_EQ(got.timestamp.tz_quarters, d.tz_quarters) << hex;
    ASSERT_EQ(got.timestamp.year, d.year);
    ASSERT_EQ(got.udh.has_value(), d.concat.has_value());
  }
}

TEST(SmsDeliver, NegativeTimezoneSign) {
  oracle::DeliverSpec d;
  d.originator = "+33612345678";
  d.text = "tz";
  d.tz_quarters = -20;
  auto got = sms::decode_deliver(oracle::encode_deliver(d));
  EXPECT_EQ(got.timestamp.tz_quarters, -20);
  EXPECT_DOUBLE_EQ(got.timestamp.tz_hours(), -5.0);
}

TEST(SmsSubmit, EmptyTextEncodes) {
  sms::SmsSubmit m;
  m.destination = sms::Address::parse("+331");
  auto enc = sms::encode_submit(m);
  EXPECT_EQ(sms::decode_submit(enc.hex), m);
  m.dcs = sms::Alphabet::ucs2;
  EXPECT_EQ(sms::decode_submit(sms::encode_submit(m).hex), m);
}

TEST(SmsSubmit, OverlongTextIsRejected) {
  sms::SmsSubmit m;
  m.destination = sms::Address::parse("+331");
  m.user_data = std::string(161, 'a');
  EXPECT_THROW(sms::encode_submit(m), cellgate::Error);
  m.dcs = sms::Alphabet::ucs2;
  m.user_data = std::string(71, 'a');
  EXPECT_THROW(sms::encode_submit(m), cellgate::Error);
}

TEST(Address, ParseForms) {
  auto intl = sms::Address::parse("+4917012345");
  EXPECT_EQ(intl.ton, sms::Ton::international);
  EXPECT_EQ(intl.digits, "4917012345");
  EXPECT_EQ(intl.to_string(), "+4917012345");
  EXPECT_EQ(sms::Address::parse("0612").ton, sms::Ton::unknown);
  EXPECT_EQ(sms::Address::parse("Bank").ton, sms::Ton::alphanumeric);
}

TEST(Segment, SplitsAtConcatBoundaries) {
  auto parts = sms::segment(std::string(161, 'x'), sms::Alphabet::gsm7, 7);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].text.size(), 153u);
  EXPECT_EQ(parts[1].text.size(), 8u);
  EXPECT_EQ(parts[0].udh->total, 2);
  EXPECT_EQ(parts[1].udh->seq, 2);
  EXPECT_EQ(sms::segment(std::string(160, 'x'), sms::Alphabet::gsm7).size(), 1u);
  EXPECT_FALSE(sms::segment("short", sms::Alphabet::gsm7)[0].udh);
  EXPECT_EQ(sms::segment(std::string(71, 'x'), sms::Alphabet::ucs2).size(), 2u);
}

TEST(Segment, NeverSplitsAnEscapePair) {
  std::string text(152, 'a');
  text += "€" + std::string(8, 'b');
  auto parts = sms::segment(text, sms::Alphabet::gsm7);
  ASSERT_EQ(parts.size(), 2u);
  for (const auto& p : parts) EXPECT_LE(sms::user_data_units(p.text, sms::Alphabet::gsm7), 153u);
  EXPECT_EQ(parts[0].text, std::string(152, 'a'));
  EXPECT_EQ(parts[0].text + parts[1].text, text);
}

TEST(Alphabet, Choice) {
  EXPECT_EQ(sms::choose_alphabet("plain text"), sms::Alphabet::gsm7);
  EXPECT_EQ(sms::choose_alphabet("check ✓"), sms::Alphabet::ucs2);
}

}  // namespace
