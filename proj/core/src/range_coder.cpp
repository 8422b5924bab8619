#include "rfz/range_coder.hpp"

#include <bit>
#include <cmath>

#include "rfz/errors.hpp"

namespace rfz {

namespace {
__extension__ using u128 = unsigned __int128;
constexpr std::uint32_t kTop = 1u << 24;

std::uint32_t split_point(std::uint32_t range, Prob16 p1) noexcept {
  const std::uint64_t p0 = 65536u - p1;
  return static_cast<std::uint32_t>((std::uint64_t{range} * p0) >> 16);
}
}  // namespace

Prob16 quantize_probability(double p1) noexcept {
  if (!(p1 > 0)) return 1;
  auto q = std::llround(p1 * 65536.0);
  if (q < 1) q = 1;
  if (q > 65535) q = 65535;
  return static_cast<Prob16>(q);
}

Prob16 quantize_probability(std::uint64_t ones, std::uint64_t total) noexcept {
  if (total == 0) return 32768;
  // round(65536 * ones / total) in integers
  auto q = static_cast<std::uint64_t>(
      (static_cast<u128>(ones) * 65536u * 2 + total) / (2 * static_cast<u128>(total)));
  if (q < 1) q = 1;
  if (q > 65535) q = 65535;
  return static_cast<Prob16>(q);
}

// ---------------------------------------------------------------------------

void BinaryRangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t pending = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void BinaryRangeEncoder::encode(bool bit, Prob16 p1) {
  const auto bound = split_point(range_, p1);
  if (!bit) {
    range_ = bound;
  } else {
    low_ += bound;
    range_ -= bound;
  }
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

Bits BinaryRangeEncoder::finish() && {
  // Shortest value in [low, low + range): the one with the most trailing zeros.
  const std::uint64_t high = low_ + range_;
  for (int k = 32; k >= 0; --k) {
    const std::uint64_t mask = (std::uint64_t{1} << k) - 1;
    const std::uint64_t v = (low_ + mask) & ~mask;
    if (v < high) {
      low_ = v;
      break;
    }
  }
  for (int i = 0; i < 5; ++i) shift_low();

  // The first byte is the initial cache, always zero: the interval never
  // reaches 1.0, so no carry can propagate into it.
  Bits bits;
  bits.bytes.assign(out_.begin() + 1, out_.end());
  while (!bits.bytes.empty() && bits.bytes.back() == 0) bits.bytes.pop_back();
  if (!bits.bytes.empty())
    bits.size = 8 * bits.bytes.size() - static_cast<std::uint64_t>(std::countr_zero(bits.bytes.back()));
  return bits;
}

// ---------------------------------------------------------------------------

BinaryRangeDecoder::BinaryRangeDecoder(std::span<const std::uint8_t> bytes, std::uint64_t begin,
                                       std::uint64_t end)
    : in_(bytes, begin, end, /*zero_extend=*/true) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t BinaryRangeDecoder::next_byte() { return static_cast<std::uint8_t>(in_.read_bits(8)); }

bool BinaryRangeDecoder::decode(Prob16 p1) {
  const auto bound = split_point(range_, p1);
  bool bit;
  if (code_ < bound) {
    range_ = bound;
    bit = false;
  } else {
    code_ -= bound;
    range_ -= bound;
    bit = true;
  }
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
  return bit;
}

// ---------------------------------------------------------------------------

namespace {
Bits encode_payload(Prob16 p1, std::span<const std::uint8_t> bits) {
  BinaryRangeEncoder enc;
  for (auto b : bits) enc.encode(b != 0, p1);
  return std::move(enc).finish();
}
}  // namespace

std::vector<std::uint8_t> arithmetic_encode_binary(double p1, std::span<const std::uint8_t> bits) {
  const auto q = quantize_probability(p1);
  ByteWriter out;
  out.u16(q);
  out.varint(bits.size());
  out.bytes(encode_payload(q, bits).bytes);
  return std::move(out).take();
}

std::vector<std::uint8_t> arithmetic_decode_binary(std::span<const std::uint8_t> stream) {
  ByteReader in(stream);
  Prob16 q;
  std::uint64_t n;
  try {
    q = in.u16();
    n = in.varint();
  } catch (const CorruptContainer&) {
    throw TruncatedStream("arithmetic stream header truncated");
  }
  if (q == 0) throw TruncatedStream("arithmetic stream header has p1 = 0");
  auto payload = stream.subspan(in.position());
  BinaryRangeDecoder dec(payload, 0, std::uint64_t{payload.size()} * 8);
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(dec.decode(q) ? 1 : 0);
  return out;
}

std::uint64_t arithmetic_payload_bits(double p1, std::span<const std::uint8_t> bits) {
  return encode_payload(quantize_probability(p1), bits).size;
}

}  // namespace rfz
