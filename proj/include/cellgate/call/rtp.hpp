#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>

#include "cellgate/util.hpp"

namespace cellgate::call {

inline constexpr std::uint8_t kPayloadPcmu = 0;
inline constexpr std::size_t kRtpHeaderBytes = 12;

struct RtpPacket {
  std::uint8_t payload_type = kPayloadPcmu;
  bool marker = false;
  std::uint16_t seq = 0;
  std::uint32_t timestamp = 0;
  std::uint32_t ssrc = 0;
  Bytes payload;
  bool operator==(const RtpPacket&) const = default;
};

Bytes encode_rtp(const RtpPacket& p);
// nullopt for anything that is not a version-2 packet; CSRCs, extension and padding are skipped.
std::optional<RtpPacket> parse_rtp(std::span<const std::uint8_t> data);

// Stamps outgoing packets: random start values, seq +1 and timestamp +samples per packet.
class RtpSender {
 public:
  RtpSender();
  RtpSender(std::uint32_t ssrc, std::uint16_t seq, std::uint32_t timestamp);

  RtpPacket next(Bytes payload, std::uint32_t samples);
  std::uint32_t ssrc() const noexcept { return ssrc_; }
  std::uint64_t sent() const noexcept { return sent_; }

 private:
  std::uint32_t ssrc_;
  std::uint16_t seq_;
  std::uint32_t timestamp_;
  std::uint64_t sent_ = 0;
};

// Reorders inbound packets. Holds up to `depth` frames and releases the oldest once full.
class JitterBuffer {
 public:
  explicit JitterBuffer(std::size_t depth = 3) : depth_(depth) {}

  // Returns false when the packet is late (behind the playout point) or a duplicate.
  bool push(std::uint16_t seq, Bytes payload);
  // Oldest frame once `depth` are held.
  std::optional<Bytes> pop();
  // Oldest frame regardless of fill level.
  std::optional<Bytes> drain();
  std::size_t size() const noexcept { return frames_.size(); }
  std::uint64_t late() const noexcept { return late_; }

 private:
  std::int64_t extend(std::uint16_t seq);
  std::optional<Bytes> take();

  std::size_t depth_;
  std::map<std::int64_t, Bytes> frames_;
  std::optional<std::int64_t> last_ext_;
  std::optional<std::int64_t> played_;
  std::uint64_t late_ = 0;
};

}  // namespace cellgate::call
