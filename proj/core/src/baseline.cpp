#include "rfz/baseline.hpp"

#include <bit>
#include <string>

#include <zlib.h>

#include "rfz/bitio.hpp"
#include "rfz/context_models.hpp"
#include "rfz/errors.hpp"

namespace rfz {

namespace {
constexpr std::uint8_t kLeaf = 0;
constexpr std::uint8_t kInternal = 1;
}  // namespace

std::vector<std::uint8_t> light_serialize(const Forest& forest) {
  validate(forest);
  const auto tables = ValueTables::build(forest);
  ByteWriter out;
  out.u8(static_cast<std::uint8_t>(forest.task));
  out.varint(forest.schema.n_obs);
  out.varint(forest.schema.size());
  for (const auto& v : forest.schema.variables) {
    out.string(v.name);
    out.u8(static_cast<std::uint8_t>(v.kind));
    if (v.kind == VariableKind::categorical) {
      out.varint(v.categories.size());
      for (const auto& c : v.categories) out.string(c);
    }
  }
  out.varint(forest.class_labels.size());
  for (const auto& l : forest.class_labels) out.string(l);
  for (const auto& t : tables.splits) {
    out.varint(t.size());
    for (double v : t.thresholds()) out.u64(std::bit_cast<std::uint64_t>(v));
    for (const auto& s : t.sets()) out.bytes(s.to_bytes());
  }
  if (forest.task == Task::regression) {
    out.varint(tables.fits.size());
    for (double v : tables.fits.values()) out.u64(std::bit_cast<std::uint64_t>(v));
  }

  out.varint(forest.trees.size());
  for (const auto& tree : forest.trees) {
    for (const auto& n : tree.nodes) {
      out.u8(n.is_leaf() ? kLeaf : kInternal);
      if (!n.is_leaf()) {
        out.varint(n.variable);
        out.varint(tables.splits[n.variable].index_of(n.split));
      }
      out.varint(tables.fits.index_of(n.fit));
    }
  }
  return std::move(out).take();
}

namespace {

std::uint32_t read_tree(ByteReader& in, Tree& tree, const std::vector<SplitValueTable>& splits,
                        const FitValueTable& fits, std::size_t depth) {
  if (depth > 1'000'000) throw CorruptContainer("light: tree too deep");
  const auto id = static_cast<std::uint32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  const auto kind = in.u8();
  if (kind > kInternal) throw CorruptContainer("light: bad structure byte");
  try {
    if (kind == kInternal) {
      const auto var = in.varint();
      if (var >= splits.size()) throw CorruptContainer("light: variable out of range");
      tree.nodes[id].variable = static_cast<std::uint32_t>(var);
      tree.nodes[id].split = splits[var].value(static_cast<std::uint32_t>(in.varint()));
    }
    tree.nodes[id].fit = fits.value(static_cast<std::uint32_t>(in.varint()));
  } catch (const std::out_of_range&) {
    throw CorruptContainer("light: value index out of range");
  }
  if (kind == kInternal) {
    const auto l = read_tree(in, tree, splits, fits, depth + 1);
    const auto r = read_tree(in, tree, splits, fits, depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
  }
  return id;
}

}  // namespace

Forest light_parse(std::span<const std::uint8_t> raw) {
  ByteReader in(raw);
  Forest f;
  const auto task = in.u8();
  if (task > 1) throw CorruptContainer("light: bad task");
  f.task = static_cast<Task>(task);
  f.schema.n_obs = in.varint();
  const auto d = in.varint();
  if (d > in.remaining()) throw CorruptContainer("light: implausible variable count");
  for (std::uint64_t j = 0; j < d; ++j) {
    Variable v;
    v.name = in.string();
    v.kind = static_cast<VariableKind>(in.u8() & 1);
    if (v.kind == VariableKind::categorical) {
      const auto n = in.varint();
      if (n > in.remaining()) throw CorruptContainer("light: implausible category count");
      for (std::uint64_t k = 0; k < n; ++k) v.categories.push_back(in.string());
    }
    f.schema.variables.push_back(std::move(v));
  }
  const auto n_labels = in.varint();
  if (n_labels > in.remaining()) throw CorruptContainer("light: implausible label count");
  for (std::uint64_t k = 0; k < n_labels; ++k) f.class_labels.push_back(in.string());

  std::vector<SplitValueTable> splits;
  for (const auto& v : f.schema.variables) {
    const auto n = in.varint();
    if (n > in.remaining()) throw CorruptContainer("light: implausible table size");
    if (v.kind == VariableKind::numerical) {
      std::vector<double> values;
      for (std::uint64_t k = 0; k < n; ++k) values.push_back(std::bit_cast<double>(in.u64()));
      splits.emplace_back(std::move(values));
    } else {
      std::vector<CategorySet> sets;
      const auto width = (v.categories.size() + 7) / 8;
      for (std::uint64_t k = 0; k < n; ++k) sets.push_back(CategorySet::from_bytes(in.bytes(width), v.categories.size()));
      splits.emplace_back(std::move(sets));
    }
  }
  FitValueTable fits;
  if (f.task == Task::regression) {
    const auto n = in.varint();
    if (n > in.remaining()) throw CorruptContainer("light: implausible fit table size");
    std::vector<double> values;
    for (std::uint64_t k = 0; k < n; ++k) values.push_back(std::bit_cast<double>(in.u64()));
    fits = FitValueTable::for_values(std::move(values));
  } else {
    fits = FitValueTable::for_classes(f.class_labels.size());
  }

  const auto trees = in.varint();
  if (trees > in.remaining()) throw CorruptContainer("light: implausible tree count");
  for (std::uint64_t t = 0; t < trees; ++t) {
    Tree tree;
    read_tree(in, tree, splits, fits, 0);
    f.trees.push_back(std::move(tree));
  }
  if (!in.at_end()) throw CorruptContainer("light: trailing bytes");
  try {
    validate(f);
  } catch (const Error& e) {
    throw CorruptContainer(std::string("light: ") + e.what());
  }
  return f;
}

std::vector<std::uint8_t> deflate_raw(std::span<const std::uint8_t> data) {
  z_stream zs{};
  if (deflateInit2(&zs, 9, Z_DEFLATED, -15, 9, Z_DEFAULT_STRATEGY) != Z_OK)
    throw std::runtime_error("deflateInit2 failed");
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(data.size())));
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("deflate did not finish");
  out.resize(zs.total_out);
  return out;
}

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> data) {
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw std::runtime_error("inflateInit2 failed");
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 15];
  int rc;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw CorruptContainer("inflate failed");
    }
    out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw CorruptContainer("deflate stream truncated");
    }
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

LightBaseline light_baseline(const Forest& forest) {
  const auto raw = light_serialize(forest);
  LightBaseline b;
  b.raw_size = raw.size();
  b.bytes = deflate_raw(raw);
  return b;
}

Forest light_restore(std::span<const std::uint8_t> deflated) { return light_parse(inflate_raw(deflated)); }

}  // namespace rfz
