#include "rfz/bitio.hpp"

#include <stdexcept>

#include "rfz/errors.hpp"

namespace rfz {

Bits Bits::from_string(std::string_view zeros_and_ones) {
  BitWriter w;
  for (char c : zeros_and_ones) {
    if (c != '0' && c != '1') throw std::invalid_argument("bit string may only contain '0' and '1'");
    w.write_bit(c == '1');
  }
  return std::move(w).take();
}

std::string Bits::to_string() const {
  std::string s;
  s.reserve(size);
  for (std::uint64_t i = 0; i < size; ++i) s.push_back((*this)[i] ? '1' : '0');
  return s;
}

void BitWriter::write_bit(bool bit) {
  if (bits_.size % 8 == 0) bits_.bytes.push_back(0);
  if (bit) bits_.bytes.back() |= static_cast<std::uint8_t>(0x80u >> (bits_.size % 8));
  ++bits_.size;
}

void BitWriter::write_bits(std::uint64_t value, unsigned count) {
  while (count > 0) {
    const unsigned used = bits_.size % 8;
    if (used == 0) bits_.bytes.push_back(0);
    const unsigned room = 8 - used;
    const unsigned take = count < room ? count : room;
    const auto chunk = static_cast<std::uint8_t>((value >> (count - take)) & ((1u << take) - 1));
    bits_.bytes.back() |= static_cast<std::uint8_t>(chunk << (room - take));
    bits_.size += take;
    count -= take;
  }
}

void BitWriter::append(const Bits& bits) {
  if (bits_.size % 8 == 0) {
    bits_.bytes.insert(bits_.bytes.end(), bits.bytes.begin(), bits.bytes.end());
    bits_.size += bits.size;
    return;
  }
  std::uint64_t i = 0;
  for (; i + 8 <= bits.size; i += 8) write_bits(bits.bytes[i / 8], 8);
  for (; i < bits.size; ++i) write_bit(bits[i]);
}

BitReader::BitReader(std::span<const std::uint8_t> bytes, std::uint64_t begin, std::uint64_t end,
                     bool zero_extend)
    : bytes_(bytes), begin_(begin), pos_(begin), end_(end), zero_extend_(zero_extend) {
  if (end < begin || (end + 7) / 8 > bytes.size()) throw TruncatedStream("bit window exceeds buffer");
}

bool BitReader::read_bit() {
  if (pos_ >= end_) {
    if (!zero_extend_) throw TruncatedStream("read past end of bit stream");
    ++pos_;
    return false;
  }
  bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
  ++pos_;
  return bit;
}

std::uint64_t BitReader::read_bits(unsigned count) {
  std::uint64_t v = 0;
  if (pos_ + count <= end_ && pos_ % 8 == 0) {
    while (count >= 8) {
      v = (v << 8) | bytes_[pos_ / 8];
      pos_ += 8;
      count -= 8;
    }
  }
  while (count-- > 0) v = (v << 1) | (read_bit() ? 1u : 0u);
  return v;
}

Bits slice_bits(std::span<const std::uint8_t> bytes, std::uint64_t begin, std::uint64_t count) {
  BitReader r(bytes, begin, begin + count);
  BitWriter w;
  std::uint64_t left = count;
  while (left >= 32) {
    w.write_bits(r.read_bits(32), 32);
    left -= 32;
  }
  w.write_bits(r.read_bits(static_cast<unsigned>(left)), static_cast<unsigned>(left));
  return std::move(w).take();
}

// ---------------------------------------------------------------------------

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

std::size_t varint_size(std::uint64_t v) noexcept {
  std::size_t n = 1;
  while (v >= 0x80) {
    v >>= 7;
    ++n;
  }
  return n;
}

void ByteWriter::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::varint(std::uint64_t v) { put_varint(out_, v); }
void ByteWriter::bytes(std::span<const std::uint8_t> data) {
  out_.insert(out_.end(), data.begin(), data.end());
}
void ByteWriter::string(std::string_view s) {
  varint(s.size());
  out_.insert(out_.end(), s.begin(), s.end());
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  if (n > remaining()) throw CorruptContainer("truncated section");
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() { return bytes(1)[0]; }

std::uint16_t ByteReader::u16() {
  auto b = bytes(2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t ByteReader::u32() {
  auto b = bytes(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = bytes(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

std::uint64_t ByteReader::varint() {
  std::uint64_t v = 0;
  for (unsigned shift = 0;; shift += 7) {
    if (shift > 63) throw CorruptContainer("varint too long");
    auto b = u8();
    if (shift == 63 && b > 1) throw CorruptContainer("varint overflows 64 bits");
    v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
    if (!(b & 0x80)) {
      if (b == 0 && shift > 0) throw CorruptContainer("non-canonical varint");
      return v;
    }
  }
}

std::string ByteReader::string() {
  auto n = varint();
  auto b = bytes(static_cast<std::size_t>(n));
  return std::string(b.begin(), b.end());
}

}  // namespace rfz
