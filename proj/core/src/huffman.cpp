#include "rfz/huffman.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>

#include "rfz/errors.hpp"

namespace rfz {

HuffmanTable HuffmanTable::build(const EmpiricalDistribution& dist) {
  const auto B = dist.alphabet();
  std::vector<std::uint8_t> lengths(B, 0);

  struct Item {
    std::uint64_t weight;
    std::uint32_t min_symbol;
    std::uint32_t node;
  };
  auto later = [](const Item& a, const Item& b) {
    return std::tie(a.weight, a.min_symbol) > std::tie(b.weight, b.min_symbol);
  };
  std::priority_queue<Item, std::vector<Item>, decltype(later)> heap(later);

  // Nodes 0..B-1 are leaves; merged nodes follow. parent[] recovers depths.
  std::vector<std::uint32_t> parent;
  parent.reserve(2 * B);
  parent.assign(B, 0);
  std::size_t present = 0;
  for (std::uint32_t s = 0; s < B; ++s) {
    if (dist.counts[s] == 0) continue;
    heap.push({dist.counts[s], s, s});
    ++present;
  }
  if (present == 0) throw EmptyDistribution("cannot build a code for an empty distribution");
  if (present == 1) {
    lengths[heap.top().node] = 1;
    return from_lengths(std::move(lengths));
  }

  while (heap.size() > 1) {
    Item a = heap.top();
    heap.pop();
    Item b = heap.top();
    heap.pop();
    const auto id = static_cast<std::uint32_t>(parent.size());
    parent.push_back(id);  // root points at itself until merged
    parent[a.node] = id;
    parent[b.node] = id;
    heap.push({a.weight + b.weight, std::min(a.min_symbol, b.min_symbol), id});
  }
  const auto root = heap.top().node;

  // Depth of each merged node, computed top-down (parents have larger ids).
  std::vector<std::uint32_t> depth(parent.size(), 0);
  for (auto id = static_cast<std::uint32_t>(parent.size()); id-- > B;)
    if (id != root) depth[id] = depth[parent[id]] + 1;
  for (std::uint32_t s = 0; s < B; ++s) {
    if (dist.counts[s] == 0) continue;
    auto d = depth[parent[s]] + 1;
    if (d > kMaxCodeLength) throw std::length_error("Huffman code length exceeds 63 bits");
    lengths[s] = static_cast<std::uint8_t>(d);
  }
  return from_lengths(std::move(lengths));
}

HuffmanTable HuffmanTable::from_lengths(std::vector<std::uint8_t> lengths) {
  HuffmanTable t;
  t.lengths_ = std::move(lengths);
  std::size_t present = 0;
  for (auto len : t.lengths_) {
    if (len > kMaxCodeLength) throw std::invalid_argument("code length too large");
    if (len > 0) ++present;
    t.max_length_ = std::max<unsigned>(t.max_length_, len);
  }
  if (present == 0) throw std::invalid_argument("code table has no symbols");
  if (present == 1) {
    if (t.max_length_ != 1) throw std::invalid_argument("single-symbol table must use length 1");
  } else {
    // Kraft equality, checked level by level without big integers.
    std::vector<std::uint64_t> per_length(t.max_length_ + 1, 0);
    for (auto len : t.lengths_)
      if (len) ++per_length[len];
    std::uint64_t available = 1;
    for (unsigned len = 1; len <= t.max_length_; ++len) {
      available *= 2;
      if (per_length[len] > available) throw std::invalid_argument("code lengths oversubscribe the code space");
      available -= per_length[len];
      if (available > present) throw std::invalid_argument("code lengths leave the code space incomplete");
    }
    if (available != 0) throw std::invalid_argument("code lengths leave the code space incomplete");
  }
  t.assign_codes();
  return t;
}

void HuffmanTable::assign_codes() {
  const auto B = lengths_.size();
  sorted_.clear();
  for (std::uint32_t s = 0; s < B; ++s)
    if (lengths_[s]) sorted_.push_back(s);
  std::stable_sort(sorted_.begin(), sorted_.end(),
                   [&](auto a, auto b) { return lengths_[a] < lengths_[b]; });

  count_.assign(max_length_ + 1, 0);
  first_code_.assign(max_length_ + 1, 0);
  first_index_.assign(max_length_ + 1, 0);
  for (auto s : sorted_) ++count_[lengths_[s]];
  std::uint64_t code = 0;
  std::uint32_t index = 0;
  for (unsigned len = 1; len <= max_length_; ++len) {
    code = (code + (len > 1 ? count_[len - 1] : 0)) << (len > 1 ? 1 : 0);
    first_code_[len] = code;
    first_index_[len] = index;
    index += count_[len];
  }
  codes_.assign(B, 0);
  std::vector<std::uint64_t> next(first_code_);
  for (auto s : sorted_) codes_[s] = next[lengths_[s]]++;
}

double HuffmanTable::average_length(const EmpiricalDistribution& dist) const {
  const auto n = dist.total();
  if (n == 0) return 0.0;
  double bits = 0.0;
  for (std::uint32_t s = 0; s < dist.alphabet(); ++s)
    if (dist.counts[s]) {
      if (!has_symbol(s)) throw UnknownSymbol("symbol " + std::to_string(s) + " has no codeword");
      bits += static_cast<double>(dist.counts[s]) * cost(s);
    }
  return bits / static_cast<double>(n);
}

void HuffmanTable::encode(BitWriter& out, std::uint32_t symbol) const {
  if (!has_symbol(symbol)) throw UnknownSymbol("symbol " + std::to_string(symbol) + " has no codeword");
  if (degenerate()) return;
  out.write_bits(codes_[symbol], lengths_[symbol]);
}

std::uint32_t HuffmanTable::decode(BitReader& in) const {
  if (degenerate()) return sorted_.front();
  std::uint64_t code = 0;
  for (unsigned len = 1; len <= max_length_; ++len) {
    code = (code << 1) | (in.read_bit() ? 1u : 0u);
    if (code - first_code_[len] < count_[len])
      return sorted_[first_index_[len] + static_cast<std::uint32_t>(code - first_code_[len])];
  }
  throw TruncatedStream("invalid codeword");  // unreachable for complete codes
}

Bits HuffmanTable::encode(std::span<const std::uint32_t> symbols) const {
  BitWriter w;
  for (auto s : symbols) encode(w, s);
  return std::move(w).take();
}

std::vector<std::uint32_t> HuffmanTable::decode(const Bits& bits, std::size_t count) const {
  BitReader r(bits);
  std::vector<std::uint32_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(decode(r));
  return out;
}

void HuffmanTable::write(ByteWriter& out) const {
  out.varint(lengths_.size());
  for (auto len : lengths_) out.varint(len);
}

HuffmanTable HuffmanTable::read(ByteReader& in) {
  const auto B = in.varint();
  if (B > in.remaining()) throw CorruptContainer("Huffman table: alphabet larger than the section");
  std::vector<std::uint8_t> lengths(static_cast<std::size_t>(B));
  for (auto& len : lengths) {
    auto v = in.varint();
    if (v > kMaxCodeLength) throw CorruptContainer("Huffman table: code length too large");
    len = static_cast<std::uint8_t>(v);
  }
  try {
    return from_lengths(std::move(lengths));
  } catch (const std::invalid_argument& e) {
    throw CorruptContainer(std::string("Huffman table: ") + e.what());
  }
}

}  // namespace rfz
