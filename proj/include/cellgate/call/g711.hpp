#pragma once

#include <cstdint>
#include <span>

#include "cellgate/util.hpp"

namespace cellgate::call {

inline constexpr int kSampleRate = 8000;
inline constexpr int kFrameSamples = 160;  // 20 ms
inline constexpr int kFrameBytes = kFrameSamples * 2;

std::uint8_t linear_to_ulaw(std::int16_t sample) noexcept;
std::int16_t ulaw_to_linear(std::uint8_t code) noexcept;

// 16-bit little-endian PCM <-> µ-law bytes.
Bytes encode_ulaw(std::span<const std::uint8_t> pcm_le);
Bytes decode_ulaw(std::span<const std::uint8_t> ulaw);

}  // namespace cellgate::call
