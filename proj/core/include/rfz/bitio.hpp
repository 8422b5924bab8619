#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rfz {

/// A bit string packed MSB-first into bytes; bits past `size` are zero.
struct Bits {
  std::vector<std::uint8_t> bytes;
  std::uint64_t size = 0;

  bool operator[](std::uint64_t i) const noexcept { return (bytes[i / 8] >> (7 - i % 8)) & 1u; }
  bool operator==(const Bits&) const = default;

  static Bits from_string(std::string_view zeros_and_ones);
  std::string to_string() const;
};

class BitWriter {
 public:
  void write_bit(bool bit);
  /// Writes the low `count` bits of `value`, most significant first. count <= 64.
  void write_bits(std::uint64_t value, unsigned count);
  void append(const Bits& bits);

  std::uint64_t size() const noexcept { return bits_.size; }
  const Bits& bits() const noexcept { return bits_; }
  Bits take() && { return std::move(bits_); }

 private:
  Bits bits_;
};

/// Reads a window [begin, end) of an MSB-first bit buffer. Reading past
/// `end` throws TruncatedStream, or yields zeros in zero-extended mode.
class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::uint64_t begin, std::uint64_t end,
            bool zero_extend = false);
  explicit BitReader(const Bits& bits, bool zero_extend = false)
      : BitReader(bits.bytes, 0, bits.size, zero_extend) {}

  bool read_bit();
  std::uint64_t read_bits(unsigned count);

  std::uint64_t position() const noexcept { return pos_ - begin_; }
  std::uint64_t remaining() const noexcept { return pos_ < end_ ? end_ - pos_ : 0; }
  bool exhausted() const noexcept { return pos_ >= end_; }
  /// Bits consumed so far, including any zero-extension past the end.
  std::uint64_t consumed() const noexcept { return pos_ - begin_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t begin_;
  std::uint64_t pos_;
  std::uint64_t end_;
  bool zero_extend_;
};

/// Copies bits [begin, begin+count) of an MSB-first buffer into a new Bits.
Bits slice_bits(std::span<const std::uint8_t> bytes, std::uint64_t begin, std::uint64_t count);

// ---------------------------------------------------------------------------
// byte-oriented helpers for container sections (little-endian, LEB128 varints)

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void varint(std::uint64_t v);
  void bytes(std::span<const std::uint8_t> data);
  void string(std::string_view s);  // varint length + bytes

  std::size_t size() const noexcept { return out_.size(); }
  std::vector<std::uint8_t>& buffer() noexcept { return out_; }
  std::vector<std::uint8_t> take() && { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

/// Every read that would run past the end throws CorruptContainer.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::uint64_t varint();
  std::span<const std::uint8_t> bytes(std::size_t n);
  std::string string();

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v);
std::size_t varint_size(std::uint64_t v) noexcept;

}  // namespace rfz
