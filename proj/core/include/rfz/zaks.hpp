#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rfz/bitio.hpp"
#include "rfz/forest.hpp"

namespace rfz {

/// Preorder bit string of a binary tree: 1 for every internal node, 0 for
/// every leaf. A tree with n internal nodes has 2n+1 bits; the single-leaf
/// tree is "0".
class ZaksSequence {
 public:
  ZaksSequence() = default;
  explicit ZaksSequence(Bits bits) : bits_(std::move(bits)) {}

  static ZaksSequence from_string(std::string_view s) { return ZaksSequence(Bits::from_string(s)); }
  std::string to_string() const { return bits_.to_string(); }

  const Bits& bits() const noexcept { return bits_; }
  std::uint64_t size() const noexcept { return bits_.size; }
  std::uint64_t internal_nodes() const noexcept { return (bits_.size - 1) / 2; }

  bool operator==(const ZaksSequence&) const = default;

 private:
  Bits bits_;
};

/// Shape of a tree without labels, nodes in preorder.
struct TreeShape {
  std::vector<std::uint32_t> left;   // kNoChild for leaves
  std::vector<std::uint32_t> right;  // kNoChild for leaves
  std::vector<std::uint32_t> parent; // kNoChild for the root
  std::vector<std::uint32_t> depth;

  std::size_t size() const noexcept { return left.size(); }
  bool is_leaf(std::size_t i) const noexcept { return left[i] == kNoChild; }
};

ZaksSequence zaks_encode(const Tree& tree);
ZaksSequence zaks_encode(const TreeShape& shape);

/// True iff the bits form exactly one feasible sequence: "0", or a string that
/// starts with 1, has one more 0 than 1s, and no proper prefix with that property.
bool is_feasible(const Bits& bits) noexcept;

/// Throws MalformedSequence if the sequence is infeasible or has trailing bits.
TreeShape zaks_decode(const ZaksSequence& z);

/// Reads one self-delimiting sequence from the reader's current position.
/// Throws MalformedSequence if the stream ends before the tree closes.
TreeShape zaks_decode_prefix(BitReader& reader, ZaksSequence* raw = nullptr);

/// Labels-free tree whose nodes carry only child links.
Tree to_tree(const TreeShape& shape);

}  // namespace rfz
