#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "rfz/bitio.hpp"
#include "rfz/zaks.hpp"

namespace rfz {

inline constexpr std::uint64_t kFrameBits = 64 * 1024 * 8;

struct StructureFrame {
  std::uint64_t bit_count = 0;           // uncompressed bits in this frame
  std::vector<std::uint8_t> compressed;  // LZW bytes

  bool operator==(const StructureFrame&) const = default;
};

struct TreeLocation {
  std::uint32_t frame = 0;
  std::uint64_t bit_offset = 0;  // within the uncompressed frame

  bool operator==(const TreeLocation&) const = default;
};

/// The concatenated Zaks sequences of a forest, cut into frames of at most
/// 64 KiB and LZW-compressed frame by frame. A tree may straddle frames.
struct StructureStream {
  std::vector<StructureFrame> frames;
  std::vector<TreeLocation> tree_index;  // one per tree, forest order

  std::size_t tree_count() const noexcept { return tree_index.size(); }
  /// Offset of each frame's record within the serialized stream.
  std::vector<std::uint64_t> frame_byte_offsets() const;

  /// Wire form: varint(frame count), then per frame varint(bits) ‖
  /// varint(bytes) ‖ LZW bytes. The tree index is not written; `read`
  /// rebuilds it by walking the sequences.
  void write(ByteWriter& out) const;
  static StructureStream read(ByteReader& in, std::size_t tree_count);

  bool operator==(const StructureStream&) const = default;
};

StructureStream pack_structures(std::span<const ZaksSequence> sequences);

/// Decompresses frame `index` (throws CorruptContainer on bad data).
Bits decode_frame(const StructureStream& stream, std::size_t index);

/// Lazily decompressed frames; reads only the frames a tree touches.
class FrameCache {
 public:
  explicit FrameCache(const StructureStream& stream) : stream_(&stream) {}

  const Bits& frame(std::size_t index);
  std::size_t frames_decoded() const noexcept { return decoded_; }

  /// Bits of the structure stream starting at `loc`, spanning frames as needed.
  TreeShape decode_tree(TreeLocation loc, ZaksSequence* raw = nullptr);

 private:
  const StructureStream* stream_;
  std::map<std::size_t, Bits> frames_;
  std::size_t decoded_ = 0;
};

/// Throws IndexError if tree_id is out of range.
ZaksSequence unpack_structure(const StructureStream& stream, std::size_t tree_id);

}  // namespace rfz
