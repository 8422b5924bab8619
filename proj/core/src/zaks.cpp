#include "rfz/zaks.hpp"

#include "rfz/errors.hpp"

namespace rfz {

ZaksSequence zaks_encode(const Tree& tree) {
  BitWriter w;
  for (const auto& n : tree.nodes) w.write_bit(!n.is_leaf());
  return ZaksSequence(std::move(w).take());
}

ZaksSequence zaks_encode(const TreeShape& shape) {
  BitWriter w;
  for (std::size_t i = 0; i < shape.size(); ++i) w.write_bit(!shape.is_leaf(i));
  return ZaksSequence(std::move(w).take());
}

bool is_feasible(const Bits& bits) noexcept {
  // `open` counts subtrees still to be read; it reaches zero exactly at the end.
  std::uint64_t open = 1;
  for (std::uint64_t i = 0; i < bits.size; ++i) {
    if (open == 0) return false;
    if (bits[i]) ++open;
    else --open;
  }
  return bits.size > 0 && open == 0;
}

namespace {

class ShapeBuilder {
 public:
  void push(bool internal) {
    const auto i = static_cast<std::uint32_t>(shape_.left.size());
    std::uint32_t parent = kNoChild;
    std::uint32_t depth = 0;
    if (i > 0) {
      if (last_internal_) {
        parent = i - 1;  // left child of the previous node
        shape_.left[parent] = i;
      } else {
        parent = waiting_.back();  // right child of the innermost open node
        waiting_.pop_back();
        shape_.right[parent] = i;
      }
      depth = shape_.depth[parent] + 1;
    }
    shape_.left.push_back(kNoChild);
    shape_.right.push_back(kNoChild);
    shape_.parent.push_back(parent);
    shape_.depth.push_back(depth);
    if (internal) waiting_.push_back(i);
    last_internal_ = internal;
  }

  TreeShape take() && { return std::move(shape_); }

 private:
  TreeShape shape_;
  std::vector<std::uint32_t> waiting_;  // internal nodes whose right child is pending
  bool last_internal_ = false;
};

}  // namespace

TreeShape zaks_decode_prefix(BitReader& reader, ZaksSequence* raw) {
  ShapeBuilder builder;
  BitWriter copy;
  std::uint64_t open = 1;
  while (open > 0) {
    if (reader.exhausted()) throw MalformedSequence("sequence ends before the tree is complete");
    bool bit = reader.read_bit();
    if (raw) copy.write_bit(bit);
    builder.push(bit);
    if (bit) ++open;
    else --open;
  }
  if (raw) *raw = ZaksSequence(std::move(copy).take());
  return std::move(builder).take();
}

TreeShape zaks_decode(const ZaksSequence& z) {
  if (z.size() == 0) throw MalformedSequence("empty sequence");
  BitReader reader(z.bits());
  auto shape = zaks_decode_prefix(reader);
  if (!reader.exhausted()) throw MalformedSequence("bits remain after the tree is complete");
  return shape;
}

Tree to_tree(const TreeShape& shape) {
  Tree tree;
  tree.nodes.resize(shape.size());
  for (std::size_t i = 0; i < shape.size(); ++i) {
    tree.nodes[i].left = shape.left[i];
    tree.nodes[i].right = shape.right[i];
  }
  return tree;
}

}  // namespace rfz
