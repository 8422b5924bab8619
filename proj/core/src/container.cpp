#include "rfz/container.hpp"

#include <algorithm>
#include <optional>
#include <string>

#include "rfz/clustering.hpp"
#include "rfz/errors.hpp"
#include "rfz/zaks.hpp"

#include "container_detail.hpp"

namespace rfz {

const char* to_string(FitCoder coder) noexcept {
  switch (coder) {
    case FitCoder::automatic: return "auto";
    case FitCoder::huffman: return "huffman";
    case FitCoder::arithmetic: return "arithmetic";
  }
  return "?";
}

FitCoder parse_fit_coder(std::string_view name) {
  if (name == "auto") return FitCoder::automatic;
  if (name == "huffman") return FitCoder::huffman;
  if (name == "arithmetic") return FitCoder::arithmetic;
  throw UsageError("unknown fit coder '" + std::string(name) + "' (expected auto, huffman or arithmetic)");
}

std::uint32_t FamilyCoders::cluster_of(Context ctx) const {
  if (contexts.empty() && cluster_count() == 1) return 0;
  auto it = std::lower_bound(contexts.begin(), contexts.end(), ctx);
  if (it == contexts.end() || *it != ctx)
    throw CorruptContainer("no coder for context (depth " + std::to_string(ctx.depth) + ", father " +
                           std::to_string(ctx.father) + ")");
  return cluster[static_cast<std::size_t>(it - contexts.begin())];
}

std::vector<std::uint64_t> CompressedContainer::tree_offsets() const {
  std::vector<std::uint64_t> out;
  out.reserve(index.size());
  std::uint64_t pos = 0;
  for (auto bits : index) {
    out.push_back(pos);
    pos += bits;
  }
  return out;
}

// ---------------------------------------------------------------------------
// compression

namespace {

std::uint64_t family_seed(std::uint64_t seed, std::uint64_t family) noexcept {
  return seed * 0x9E3779B97F4A7C15ull + family;
}

FamilyCoders build_family(const std::vector<ConditionalModel>& models, DictionaryCost cost,
                          const CompressOptions& opts, std::uint64_t family, bool arithmetic) {
  FamilyCoders fc;
  if (models.empty()) return fc;
  ClusteringProblem problem;
  problem.cost = cost;
  problem.k_max = opts.k_max;
  problem.seed = family_seed(opts.seed, family);
  problem.restarts = opts.restarts;
  for (const auto& m : models) {
    fc.contexts.push_back(m.context);
    problem.models.push_back(m.dist);
  }
  auto result = cluster_search(problem);
  fc.cluster = result.assignment;
  // a single cluster serves every context; no map is kept
  if (result.pooled.size() == 1) {
    fc.contexts.clear();
    fc.cluster.clear();
  }
  for (const auto& pooled : result.pooled) {
    if (arithmetic) fc.p1.push_back(quantize_probability(pooled.counts[1], pooled.total()));
    else fc.tables.push_back(HuffmanTable::build(pooled));
  }
  return fc;
}

}  // namespace

CompressedContainer compress(const Forest& forest, const CompressOptions& opts) {
  validate(forest);
  if (forest.schema.size() > 0xFFFF) throw UsageError("at most 65535 variables fit in a container");
  if (forest.max_depth() > 0xFFFF) throw UsageError("trees deeper than 65535 levels do not fit in a container");
  if (forest.tree_count() > 0xFFFFFFFFull) throw UsageError("too many trees for one container");

  const bool binary = forest.task == Task::classification && forest.class_labels.size() == 2;
  bool arithmetic = false;
  switch (opts.fit_coder) {
    case FitCoder::automatic: arithmetic = binary; break;
    case FitCoder::huffman: break;
    case FitCoder::arithmetic:
      if (!binary) throw UsageError("the arithmetic fit coder needs a two-class classification forest");
      arithmetic = true;
      break;
  }

  CompressedContainer c;
  c.task = forest.task;
  c.fit_coder = arithmetic ? FitCoder::arithmetic : FitCoder::huffman;
  c.tree_count = static_cast<std::uint32_t>(forest.tree_count());
  c.max_depth = static_cast<std::uint16_t>(forest.max_depth());
  c.schema = forest.schema;
  c.class_labels = forest.class_labels;

  std::vector<ZaksSequence> sequences;
  sequences.reserve(forest.trees.size());
  for (const auto& t : forest.trees) sequences.push_back(zaks_encode(t));
  c.structure = pack_structures(sequences);

  ModelSet models = extract_models(forest);
  c.values = models.values;
  const auto d = forest.schema.size();

  c.names = build_family(models.names, dictionary_cost(DictionaryKind::names, {.variables = d}), opts, 0, false);
  for (std::size_t j = 0; j < d; ++j) {
    const auto kind = forest.schema.variables[j].kind == VariableKind::numerical ? DictionaryKind::numerical_split
                                                                                 : DictionaryKind::categorical_split;
    DictionaryFacts facts{.variables = d, .distinct_values = c.values.splits[j].size(),
                          .observations = forest.schema.n_obs};
    c.splits.push_back(build_family(models.splits[j], dictionary_cost(kind, facts), opts, 1 + j, false));
  }
  c.fits = build_family(models.fits,
                        dictionary_cost(DictionaryKind::fits, {.variables = d, .distinct_values = c.values.fits.size()}),
                        opts, 1 + d, arithmetic);

  // Per tree, in preorder: each internal node's name and split, then its fit.
  // Range-coded fits cannot share a bitstream with prefix codes, so in that
  // mode they follow the tree's name/split symbols as one block.
  BitWriter payload;
  for (const auto& tree : forest.trees) {
    const auto ctx = node_contexts(tree);
    const auto start = payload.size();
    auto encode_fit = [&](std::size_t i) {
      const auto& table = c.fits.tables[c.fits.cluster_of({ctx.depth[i], ctx.father[i]})];
      table.encode(payload, c.values.fits.index_of(tree.nodes[i].fit));
    };
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& n = tree.nodes[i];
      const Context here{ctx.depth[i], ctx.father[i]};
      if (!n.is_leaf()) {
        c.names.tables[c.names.cluster_of(here)].encode(payload, n.variable);
        const auto& family = c.splits[n.variable];
        family.tables[family.cluster_of(here)].encode(payload, c.values.splits[n.variable].index_of(n.split));
      }
      if (!arithmetic) encode_fit(i);
    }
    if (arithmetic) {
      BinaryRangeEncoder enc;
      for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto p1 = c.fits.p1[c.fits.cluster_of({ctx.depth[i], ctx.father[i]})];
        enc.encode(std::get<ClassLabel>(tree.nodes[i].fit).index == 1, p1);
      }
      payload.append(std::move(enc).finish());
    }
    c.index.push_back(payload.size() - start);
  }
  c.payload = std::move(payload).take();
  return c;
}

// ---------------------------------------------------------------------------
// decoding

namespace {

template <class F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const TruncatedStream& e) {
    throw CorruptContainer(std::string("payload: ") + e.what());
  }
}

/// Decodes one tree's payload lazily, node by node in preorder.
class TreeDecoder {
 public:
  TreeDecoder(const CompressedContainer& c, const TreeShape& shape, std::uint64_t begin, std::uint64_t bits)
      : c_(c), shape_(shape), begin_(begin), end_(begin + bits), in_(c.payload.bytes, begin, end_),
        arithmetic_(c.fit_coder == FitCoder::arithmetic),
        vars_(shape.size(), 0), split_index_(shape.size(), 0), fit_index_(shape.size(), 0) {}

  std::uint32_t variable(std::uint32_t node) {
    advance(node);
    return vars_[node];
  }

  Split split(std::uint32_t node) {
    advance(node);
    return c_.values.splits[vars_[node]].value(split_index_[node]);
  }

  Fit fit(std::uint32_t node) {
    if (arithmetic_) {
      advance(static_cast<std::uint32_t>(shape_.size() - 1));
      if (!range_) range_.emplace(c_.payload.bytes, begin_ + in_.position(), end_);
      while (next_fit_ <= node) {
        const auto i = next_fit_++;
        const auto cl = c_.fits.cluster_of(context(i));
        if (cl >= c_.fits.p1.size()) throw CorruptContainer("fit cluster out of range");
        fit_index_[i] = guarded([&] { return range_->decode(c_.fits.p1[cl]) ? 1u : 0u; });
      }
    } else {
      advance(node);
    }
    return c_.values.fits.value(fit_index_[node]);
  }

  /// After decoding every node: the tree's symbols must fill its segment exactly.
  std::uint64_t consumed() const { return in_.position(); }

  void check_exhausted() const {
    if (!arithmetic_ && in_.remaining() != 0) throw CorruptContainer("tree segment longer than its symbols");
  }

  /// Bits per stream so far; range-coded fits own the rest of the segment.
  StreamBits spent() const {
    StreamBits b = spent_;
    if (arithmetic_) b.fits = end_ - begin_ - b.names - b.splits;
    return b;
  }

 private:
  // Decodes nodes up to and including `node`.
  void advance(std::uint32_t node) {
    while (next_ <= node) {
      const auto i = next_++;
      if (!shape_.is_leaf(i)) {
        auto pos = in_.position();
        const auto& table = c_.names.tables.at(c_.names.cluster_of(context(i)));
        const auto v = guarded([&] { return table.decode(in_); });
        if (v >= c_.schema.size()) throw CorruptContainer("decoded variable index out of range");
        vars_[i] = v;
        spent_.names += in_.position() - pos;

        pos = in_.position();
        const auto& family = c_.splits.at(v);
        const auto cl = family.cluster_of(context(i));
        if (cl >= family.tables.size()) throw CorruptContainer("split cluster out of range");
        const auto s = guarded([&] { return family.tables[cl].decode(in_); });
        if (s >= c_.values.splits[v].size()) throw CorruptContainer("decoded split index out of range");
        split_index_[i] = s;
        spent_.splits += in_.position() - pos;
      }
      if (!arithmetic_) {
        const auto pos = in_.position();
        const auto cl = c_.fits.cluster_of(context(i));
        if (cl >= c_.fits.tables.size()) throw CorruptContainer("fit cluster out of range");
        const auto f = guarded([&] { return c_.fits.tables[cl].decode(in_); });
        if (f >= c_.values.fits.size()) throw CorruptContainer("decoded fit index out of range");
        fit_index_[i] = f;
        spent_.fits += in_.position() - pos;
      }
    }
  }

  Context context(std::uint32_t i) const {
    const auto p = shape_.parent[i];
    return {shape_.depth[i], p == kNoChild ? kRootFather : static_cast<std::int32_t>(vars_[p])};
  }

  const CompressedContainer& c_;
  const TreeShape& shape_;
  std::uint64_t begin_;
  std::uint64_t end_;
  BitReader in_;
  bool arithmetic_;
  std::optional<BinaryRangeDecoder> range_;
  std::vector<std::uint32_t> vars_;
  std::vector<std::uint32_t> split_index_;
  std::vector<std::uint32_t> fit_index_;
  std::uint32_t next_ = 0;
  std::uint32_t next_fit_ = 0;
  StreamBits spent_;
};

TreeShape tree_shape(FrameCache& cache, const CompressedContainer& c, std::size_t t) {
  try {
    return cache.decode_tree(c.structure.tree_index.at(t));
  } catch (const MalformedSequence& e) {
    throw CorruptContainer(std::string("structure: ") + e.what());
  } catch (const TruncatedStream& e) {
    throw CorruptContainer(std::string("structure: ") + e.what());
  }
}

void check_consistent(const CompressedContainer& c) {
  if (c.index.size() != c.tree_count || c.structure.tree_count() != c.tree_count)
    throw CorruptContainer("tree count disagrees between sections");
  std::uint64_t bits = 0;
  for (auto b : c.index) bits += b;
  if (bits != c.payload.size) throw CorruptContainer("payload length disagrees with the tree index");
  if (c.splits.size() != c.schema.size()) throw CorruptContainer("split coder count disagrees with the schema");
}

}  // namespace

namespace {

Tree decode_tree(const CompressedContainer& c, FrameCache& cache, std::size_t t, std::uint64_t offset,
                 StreamBits* spent) {
  const auto shape = tree_shape(cache, c, t);
  if (shape.size() > 1 && *std::max_element(shape.depth.begin(), shape.depth.end()) > c.max_depth)
    throw CorruptContainer("tree deeper than the header allows");
  TreeDecoder dec(c, shape, offset, c.index[t]);
  Tree tree = to_tree(shape);
  const auto n = static_cast<std::uint32_t>(shape.size());
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& node = tree.nodes[i];
    if (!shape.is_leaf(i)) {
      node.variable = dec.variable(i);
      node.split = dec.split(i);
    }
    node.fit = dec.fit(i);
  }
  dec.check_exhausted();
  if (spent) {
    const auto b = dec.spent();
    spent->names += b.names;
    spent->splits += b.splits;
    spent->fits += b.fits;
  }
  return tree;
}

}  // namespace

std::vector<std::uint64_t> detail::walk_segments(const CompressedContainer& c) {
  if (c.fit_coder != FitCoder::huffman) throw UsageError("range-coded payloads are not self-delimiting");
  if (c.structure.tree_count() != c.tree_count) throw CorruptContainer("tree count disagrees between sections");
  FrameCache cache(c.structure);
  std::vector<std::uint64_t> lengths;
  lengths.reserve(c.tree_count);
  std::uint64_t offset = 0;
  for (std::size_t t = 0; t < c.tree_count; ++t) {
    const auto shape = tree_shape(cache, c, t);
    TreeDecoder dec(c, shape, offset, c.payload.size - offset);
    dec.fit(static_cast<std::uint32_t>(shape.size() - 1));
    lengths.push_back(dec.consumed());
    offset += dec.consumed();
  }
  if (offset != c.payload.size) throw CorruptContainer("payload continues after the last tree");
  return lengths;
}

Forest decompress(const CompressedContainer& c) {
  check_consistent(c);
  Forest f;
  f.schema = c.schema;
  f.task = c.task;
  f.class_labels = c.class_labels;
  f.trees.reserve(c.tree_count);
  FrameCache cache(c.structure);
  const auto offsets = c.tree_offsets();
  for (std::size_t t = 0; t < c.tree_count; ++t) f.trees.push_back(decode_tree(c, cache, t, offsets[t], nullptr));
  try {
    validate(f);
  } catch (const Error& e) {
    throw CorruptContainer(std::string("decoded forest is invalid: ") + e.what());
  }
  return f;
}

StreamBits payload_breakdown(const CompressedContainer& c) {
  check_consistent(c);
  FrameCache cache(c.structure);
  const auto offsets = c.tree_offsets();
  StreamBits total;
  for (std::size_t t = 0; t < c.tree_count; ++t) decode_tree(c, cache, t, offsets[t], &total);
  return total;
}

Fit predict_compressed(const CompressedContainer& c, std::span<const std::optional<double>> x, AccessStats* stats) {
  check_observation(c.schema, x);
  check_consistent(c);
  FrameCache cache(c.structure);
  const auto offsets = c.tree_offsets();
  std::vector<Fit> per_tree;
  per_tree.reserve(c.tree_count);
  for (std::uint32_t t = 0; t < c.tree_count; ++t) {
    const auto shape = tree_shape(cache, c, t);
    TreeDecoder dec(c, shape, offsets[t], c.index[t]);
    std::uint32_t node = 0;
    while (!shape.is_leaf(node)) {
      const auto var = dec.variable(node);
      const auto& value = x[var];
      if (!value) break;
      node = goes_left(dec.split(node), *value) ? shape.left[node] : shape.right[node];
    }
    per_tree.push_back(dec.fit(node));
    if (stats) {
      ++stats->trees_touched;
      stats->trees.push_back(t);
    }
  }
  if (stats) stats->frames_decoded += cache.frames_decoded();
  return aggregate(c.task, c.class_labels.size(), per_tree);
}

}  // namespace rfz
