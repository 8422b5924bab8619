#include "rfz/lzw.hpp"

#include <bit>
#include <unordered_map>

#include "rfz/bitio.hpp"
#include "rfz/errors.hpp"

namespace rfz::lzw {

namespace {

unsigned width_for(std::uint32_t k) noexcept {
  auto w = static_cast<unsigned>(std::bit_width(256u + k));
  return w > kMaxWidth ? kMaxWidth : w;
}

}  // namespace

std::vector<std::uint8_t> compress(std::span<const std::uint8_t> input) {
  BitWriter out;
  if (input.empty()) return {};

  // (prefix code << 8 | next byte) -> code
  std::unordered_map<std::uint32_t, std::uint32_t> dict;
  dict.reserve(kDictionarySize);
  std::uint32_t next = kFirstCode;
  std::uint32_t k = 0;  // codes emitted since the last clear

  std::uint32_t current = input[0];
  for (std::size_t i = 1; i < input.size(); ++i) {
    const std::uint32_t key = (current << 8) | input[i];
    if (auto it = dict.find(key); it != dict.end()) {
      current = it->second;
      continue;
    }
    out.write_bits(current, width_for(k++));
    dict.emplace(key, next++);
    if (next == kDictionarySize) {
      out.write_bits(kClearCode, width_for(k));
      dict.clear();
      next = kFirstCode;
      k = 0;
    }
    current = input[i];
  }
  out.write_bits(current, width_for(k));
  return std::move(out).take().bytes;
}

std::vector<std::uint8_t> decompress(std::span<const std::uint8_t> input, std::size_t output_size) {
  std::vector<std::uint8_t> out;
  out.reserve(output_size);
  if (output_size == 0) {
    if (!input.empty()) throw CorruptContainer("LZW: data for an empty frame");
    return out;
  }

  // Entry c >= 257 is (prefix code, last byte); strings are rebuilt backwards.
  std::vector<std::uint32_t> prefix(kDictionarySize);
  std::vector<std::uint8_t> last(kDictionarySize);
  std::vector<std::uint8_t> first(kDictionarySize);
  std::vector<std::uint32_t> length(kDictionarySize);
  for (std::uint32_t c = 0; c < 256; ++c) {
    last[c] = first[c] = static_cast<std::uint8_t>(c);
    length[c] = 1;
  }

  BitReader in(input, 0, std::uint64_t{input.size()} * 8);
  std::uint32_t next = kFirstCode;
  std::uint32_t k = 0;
  std::uint32_t previous = kClearCode;  // sentinel: nothing read since the last clear

  auto emit = [&](std::uint32_t code) {
    const auto n = length[code];
    if (out.size() + n > output_size) throw CorruptContainer("LZW: frame decodes past its recorded size");
    out.resize(out.size() + n);
    auto pos = out.size();
    for (auto c = code;; c = prefix[c]) {
      out[--pos] = last[c];
      if (c < 256) break;
    }
  };

  while (out.size() < output_size) {
    const unsigned width = width_for(k);
    if (in.remaining() < width) throw CorruptContainer("LZW: code stream truncated");
    const auto code = static_cast<std::uint32_t>(in.read_bits(width));
    ++k;
    if (code == kClearCode) {
      next = kFirstCode;
      k = 0;
      previous = kClearCode;
      continue;
    }
    if (previous == kClearCode) {
      if (code >= 256) throw CorruptContainer("LZW: first code after a clear must be a literal");
      emit(code);
      previous = code;
      continue;
    }
    if (code > next || next >= kDictionarySize) throw CorruptContainer("LZW: code out of range");
    const std::uint8_t head = code < next ? first[code] : first[previous];
    prefix[next] = previous;
    last[next] = head;
    first[next] = first[previous];
    length[next] = length[previous] + 1;
    ++next;
    emit(code);
    previous = code;
  }
  return out;
}

}  // namespace rfz::lzw
