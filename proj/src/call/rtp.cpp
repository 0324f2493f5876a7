#include "cellgate/call/rtp.hpp"

#include <random>

namespace cellgate::call {

Bytes encode_rtp(const RtpPacket& p) {
  Bytes out;
  out.reserve(kRtpHeaderBytes + p.payload.size());
  out.push_back(0x80);
  out.push_back(static_cast<std::uint8_t>((p.marker ? 0x80 : 0) | (p.payload_type & 0x7F)));
  out.push_back(static_cast<std::uint8_t>(p.seq >> 8));
  out.push_back(static_cast<std::uint8_t>(p.seq));
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(p.timestamp >> shift));
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(p.ssrc >> shift));
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

std::optional<RtpPacket> parse_rtp(std::span<const std::uint8_t> d) {
  if (d.size() < kRtpHeaderBytes || (d[0] >> 6) != 2) return std::nullopt;
  auto be32 = [&](std::size_t i) {
    return static_cast<std::uint32_t>(d[i]) << 24 | static_cast<std::uint32_t>(d[i + 1]) << 16 |
           static_cast<std::uint32_t>(d[i + 2]) << 8 | d[i + 3];
  };
  RtpPacket p;
  p.marker = d[1] & 0x80;
  p.payload_type = d[1] & 0x7F;
  p.seq = static_cast<std::uint16_t>(d[2] << 8 | d[3]);
  p.timestamp = be32(4);
  p.ssrc = be32(8);
  std::size_t off = kRtpHeaderBytes + 4 * (d[0] & 0x0F);
  if (d[0] & 0x10) {
    if (off + 4 > d.size()) return std::nullopt;
    off += 4 + 4 * static_cast<std::size_t>(d[off + 2] << 8 | d[off + 3]);
  }
  std::size_t end = d.size();
  if (d[0] & 0x20) {
    if (end == 0 || d[end - 1] > end) return std::nullopt;
    end -= d[end - 1];
  }
  if (off > end) return std::nullopt;
  p.payload.assign(d.begin() + static_cast<std::ptrdiff_t>(off), d.begin() + static_cast<std::ptrdiff_t>(end));
  return p;
}

RtpSender::RtpSender() {
  std::random_device rd;
  std::mt19937 rng(rd());
  ssrc_ = rng();
  seq_ = static_cast<std::uint16_t>(rng());
  timestamp_ = rng();
}

RtpSender::RtpSender(std::uint32_t ssrc, std::uint16_t seq, std::uint32_t timestamp)
    : ssrc_(ssrc), seq_(seq), timestamp_(timestamp) {}

RtpPacket RtpSender::next(Bytes payload, std::uint32_t samples) {
  RtpPacket p;
  p.marker = sent_ == 0;
  p.seq = seq_;
  p.timestamp = timestamp_;
  p.ssrc = ssrc_;
  p.payload = std::move(payload);
  ++seq_;
  timestamp_ += samples;
  ++sent_;
  return p;
}

std::int64_t JitterBuffer::extend(std::uint16_t seq) {
  if (!last_ext_) return *(last_ext_ = seq);
  auto delta = static_cast<std::int16_t>(static_cast<std::uint16_t>(seq - static_cast<std::uint16_t>(*last_ext_)));
  auto ext = *last_ext_ + delta;
  if (ext > *last_ext_) last_ext_ = ext;
  return ext;
}

bool JitterBuffer::push(std::uint16_t seq, Bytes payload) {
  auto ext = extend(seq);
  if ((played_ && ext <= *played_) || frames_.count(ext)) {
    ++late_;
    return false;
  }
  frames_.emplace(ext, std::move(payload));
  return true;
}

std::optional<Bytes> JitterBuffer::take() {
  if (frames_.empty()) return std::nullopt;
  auto it = frames_.begin();
  played_ = it->first;
  auto out = std::move(it->second);
  frames_.erase(it);
  return out;
}

std::optional<Bytes> JitterBuffer::pop() {
  if (frames_.size() < depth_) return std::nullopt;
  return take();
}

std::optional<Bytes> JitterBuffer::drain() { return take(); }

}  // namespace cellgate::call
