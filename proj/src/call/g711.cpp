#include "cellgate/call/g711.hpp"

namespace cellgate::call {

namespace {
constexpr int kBias = 0x84;
constexpr int kClip = 32635;
}  // namespace

std::uint8_t linear_to_ulaw(std::int16_t sample) noexcept {
  int s = sample;
  int sign = 0;
  if (s < 0) {
    s = -s;
    sign = 0x80;
  }
  if (s > kClip) s = kClip;
  s += kBias;
  int exponent = 7;
  for (int mask = 0x4000; (s & mask) == 0 && exponent > 0; mask >>= 1) --exponent;
  int mantissa = (s >> (exponent + 3)) & 0x0F;
  return static_cast<std::uint8_t>(~(sign | (exponent << 4) | mantissa));
}

std::int16_t ulaw_to_linear(std::uint8_t code) noexcept {
  int u = ~code & 0xFF;
  int t = (((u & 0x0F) << 3) + kBias) << ((u & 0x70) >> 4);
  return static_cast<std::int16_t>((u & 0x80) ? kBias - t : t - kBias);
}

Bytes encode_ulaw(std::span<const std::uint8_t> pcm_le) {
  Bytes out(pcm_le.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto v = static_cast<std::int16_t>(pcm_le[2 * i] | (pcm_le[2 * i + 1] << 8));
    out[i] = linear_to_ulaw(v);
  }
  return out;
}

Bytes decode_ulaw(std::span<const std::uint8_t> ulaw) {
  Bytes out(ulaw.size() * 2);
  for (std::size_t i = 0; i < ulaw.size(); ++i) {
    auto v = static_cast<std::uint16_t>(ulaw_to_linear(ulaw[i]));
    out[2 * i] = static_cast<std::uint8_t>(v & 0xFF);
    out[2 * i + 1] = static_cast<std::uint8_t>(v >> 8);
  }
  return out;
}

}  // namespace cellgate::call
