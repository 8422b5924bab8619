#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rfz/bitio.hpp"

namespace rfz {

/// P(bit = 1) in 1/65536 units, clamped to [1, 65535].
using Prob16 = std::uint16_t;

Prob16 quantize_probability(double p1) noexcept;
Prob16 quantize_probability(std::uint64_t ones, std::uint64_t total) noexcept;

/// Binary range coder: 32-bit range, carry propagation through a cached
/// byte, probabilities fixed per call (not adaptive). The encoder terminates
/// on the shortest value inside the final interval and trims trailing zero
/// bits; the decoder reads zeros past the end.
class BinaryRangeEncoder {
 public:
  void encode(bool bit, Prob16 p1);
  /// Flushes and returns the payload with its exact bit length.
  Bits finish() &&;

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class BinaryRangeDecoder {
 public:
  /// Reads the window [begin, end) of an MSB-first buffer.
  BinaryRangeDecoder(std::span<const std::uint8_t> bytes, std::uint64_t begin, std::uint64_t end);
  explicit BinaryRangeDecoder(const Bits& bits) : BinaryRangeDecoder(bits.bytes, 0, bits.size) {}

  bool decode(Prob16 p1);

 private:
  std::uint8_t next_byte();

  BitReader in_;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

/// Standalone stream: u16 p1 (little-endian) ‖ varint(bit count) ‖ payload.
std::vector<std::uint8_t> arithmetic_encode_binary(double p1, std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> arithmetic_decode_binary(std::span<const std::uint8_t> stream);

/// Payload of a standalone stream in bits, before byte padding.
std::uint64_t arithmetic_payload_bits(double p1, std::span<const std::uint8_t> bits);

}  // namespace rfz
