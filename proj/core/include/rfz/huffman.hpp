#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rfz/bitio.hpp"
#include "rfz/entropy.hpp"

namespace rfz {

/// Canonical Huffman code over {0, ..., B-1}, described by code lengths
/// alone (0 = symbol absent). Codewords are assigned shortest first, ties by
/// ascending symbol. A table with a single present symbol is degenerate: the
/// symbol is stored with length 1 but coded with zero bits.
class HuffmanTable {
 public:
  static constexpr unsigned kMaxCodeLength = 63;

  HuffmanTable() = default;

  /// Optimal code for the counts; heap ties break by (count, lowest symbol).
  /// Throws EmptyDistribution if every count is zero.
  static HuffmanTable build(const EmpiricalDistribution& dist);

  /// Throws std::invalid_argument unless the lengths describe a complete
  /// prefix code (Kraft sum exactly 1) or the degenerate single-symbol case.
  static HuffmanTable from_lengths(std::vector<std::uint8_t> lengths);

  std::size_t alphabet() const noexcept { return lengths_.size(); }
  const std::vector<std::uint8_t>& lengths() const noexcept { return lengths_; }
  unsigned length(std::uint32_t symbol) const noexcept { return symbol < lengths_.size() ? lengths_[symbol] : 0; }
  std::uint64_t codeword(std::uint32_t symbol) const noexcept { return codes_[symbol]; }
  bool degenerate() const noexcept { return sorted_.size() == 1; }
  bool has_symbol(std::uint32_t symbol) const noexcept { return length(symbol) > 0; }

  /// Bits spent coding a symbol (0 in the degenerate case).
  unsigned cost(std::uint32_t symbol) const noexcept { return degenerate() ? 0 : length(symbol); }
  /// Expected bits per symbol under `dist`.
  double average_length(const EmpiricalDistribution& dist) const;

  /// Throws UnknownSymbol if the symbol has no codeword.
  void encode(BitWriter& out, std::uint32_t symbol) const;
  /// Throws TruncatedStream if the reader runs out mid-codeword.
  std::uint32_t decode(BitReader& in) const;

  Bits encode(std::span<const std::uint32_t> symbols) const;
  std::vector<std::uint32_t> decode(const Bits& bits, std::size_t count) const;

  /// varint(B) then one varint code length per symbol.
  void write(ByteWriter& out) const;
  static HuffmanTable read(ByteReader& in);  // throws CorruptContainer

  bool operator==(const HuffmanTable& other) const { return lengths_ == other.lengths_; }

 private:
  void assign_codes();

  std::vector<std::uint8_t> lengths_;
  std::vector<std::uint64_t> codes_;
  std::vector<std::uint32_t> sorted_;        // present symbols by (length, symbol)
  std::vector<std::uint64_t> first_code_;    // per length
  std::vector<std::uint32_t> first_index_;   // per length, into sorted_
  std::vector<std::uint32_t> count_;         // per length
  unsigned max_length_ = 0;
};

}  // namespace rfz
