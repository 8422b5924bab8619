#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rfz::lzw {

// Byte-oriented LZW with variable-width codes (9 to 12 bits, MSB-first).
// Codes 0-255 are literals and 256 clears the dictionary; new strings start
// at 257. The k-th code after a clear is written with
// max(9, min(12, bit_width(256 + k))) bits, so encoder and decoder agree on
// widths without signalling. When the 4096-entry dictionary fills up the
// encoder emits a clear code and starts over.

inline constexpr unsigned kMaxWidth = 12;
inline constexpr std::uint32_t kClearCode = 256;
inline constexpr std::uint32_t kFirstCode = 257;
inline constexpr std::uint32_t kDictionarySize = 1u << kMaxWidth;

std::vector<std::uint8_t> compress(std::span<const std::uint8_t> input);

/// Throws CorruptContainer if the code stream is invalid or does not yield
/// exactly `output_size` bytes.
std::vector<std::uint8_t> decompress(std::span<const std::uint8_t> input, std::size_t output_size);

}  // namespace rfz::lzw
