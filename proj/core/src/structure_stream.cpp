#include "rfz/structure_stream.hpp"

#include <string>

#include "rfz/errors.hpp"
#include "rfz/lzw.hpp"

namespace rfz {

StructureStream pack_structures(std::span<const ZaksSequence> sequences) {
  StructureStream stream;
  BitWriter frame;
  auto flush = [&] {
    if (frame.size() == 0) return;
    StructureFrame f;
    f.bit_count = frame.size();
    f.compressed = lzw::compress(frame.bits().bytes);
    stream.frames.push_back(std::move(f));
    frame = BitWriter{};
  };

  for (const auto& z : sequences) {
    if (frame.size() == kFrameBits) flush();
    stream.tree_index.push_back({static_cast<std::uint32_t>(stream.frames.size()), frame.size()});
    const Bits& bits = z.bits();
    std::uint64_t i = 0;
    while (i < bits.size) {
      if (frame.size() == kFrameBits) flush();
      const auto room = kFrameBits - frame.size();
      const auto take = std::min<std::uint64_t>(room, bits.size - i);
      if (i == 0 && take == bits.size) {
        frame.append(bits);
      } else {
        frame.append(slice_bits(bits.bytes, i, take));
      }
      i += take;
    }
  }
  flush();
  return stream;
}

std::vector<std::uint64_t> StructureStream::frame_byte_offsets() const {
  std::vector<std::uint64_t> offsets;
  std::uint64_t pos = varint_size(frames.size());
  for (const auto& f : frames) {
    offsets.push_back(pos);
    pos += varint_size(f.bit_count) + varint_size(f.compressed.size()) + f.compressed.size();
  }
  return offsets;
}

void StructureStream::write(ByteWriter& out) const {
  out.varint(frames.size());
  for (const auto& f : frames) {
    out.varint(f.bit_count);
    out.varint(f.compressed.size());
    out.bytes(f.compressed);
  }
}

StructureStream StructureStream::read(ByteReader& in, std::size_t tree_count) {
  StructureStream s;
  const auto n_frames = in.varint();
  if (n_frames > in.remaining()) throw CorruptContainer("structure: implausible frame count");
  for (std::uint64_t i = 0; i < n_frames; ++i) {
    StructureFrame f;
    f.bit_count = in.varint();
    if (f.bit_count == 0 || f.bit_count > kFrameBits) throw CorruptContainer("structure: bad frame size");
    if (i + 1 < n_frames && f.bit_count != kFrameBits) throw CorruptContainer("structure: short frame before the last");
    auto n = in.varint();
    auto bytes = in.bytes(static_cast<std::size_t>(n));
    f.compressed.assign(bytes.begin(), bytes.end());
    s.frames.push_back(std::move(f));
  }
  if (tree_count > 0 && s.frames.empty()) throw CorruptContainer("structure: no frames");

  // Tree boundaries are not stored: walk the sequences, each of which is
  // self-delimiting, frame after frame.
  s.tree_index.reserve(std::min<std::uint64_t>(tree_count, n_frames * kFrameBits));
  std::uint64_t open = 0;
  for (std::uint32_t f = 0; f < s.frames.size(); ++f) {
    const Bits bits = decode_frame(s, f);
    for (std::uint64_t pos = 0; pos < bits.size; ++pos) {
      if (open == 0) {
        if (s.tree_index.size() == tree_count) throw CorruptContainer("structure: bits after the last tree");
        s.tree_index.push_back({f, pos});
        open = 1;
      }
      if (bits[pos]) ++open;
      else --open;
    }
  }
  if (open != 0 || s.tree_index.size() != tree_count)
    throw CorruptContainer("structure: stream ends inside a tree or holds too few trees");
  return s;
}

Bits decode_frame(const StructureStream& stream, std::size_t index) {
  const auto& f = stream.frames.at(index);
  Bits bits;
  bits.bytes = lzw::decompress(f.compressed, static_cast<std::size_t>((f.bit_count + 7) / 8));
  bits.size = f.bit_count;
  return bits;
}

const Bits& FrameCache::frame(std::size_t index) {
  auto it = frames_.find(index);
  if (it == frames_.end()) {
    it = frames_.emplace(index, decode_frame(*stream_, index)).first;
    ++decoded_;
  }
  return it->second;
}

TreeShape FrameCache::decode_tree(TreeLocation loc, ZaksSequence* raw) {
  BitWriter bits;
  std::uint64_t open = 1;
  std::size_t f = loc.frame;
  std::uint64_t pos = loc.bit_offset;
  while (open > 0) {
    if (f >= stream_->frames.size()) throw CorruptContainer("structure: stream ends inside a tree");
    const Bits& frame_bits = frame(f);
    for (; pos < frame_bits.size && open > 0; ++pos) {
      const bool bit = frame_bits[pos];
      bits.write_bit(bit);
      if (bit) ++open;
      else --open;
    }
    if (open > 0) {
      ++f;
      pos = 0;
    }
  }
  ZaksSequence z(std::move(bits).take());
  auto shape = zaks_decode(z);
  if (raw) *raw = std::move(z);
  return shape;
}

ZaksSequence unpack_structure(const StructureStream& stream, std::size_t tree_id) {
  if (tree_id >= stream.tree_index.size())
    throw IndexError("tree " + std::to_string(tree_id) + " out of range (" +
                     std::to_string(stream.tree_index.size()) + " trees)");
  FrameCache cache(stream);
  ZaksSequence z;
  cache.decode_tree(stream.tree_index[tree_id], &z);
  return z;
}

}  // namespace rfz
