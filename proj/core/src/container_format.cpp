#include <bit>
#include <charconv>
#include <cmath>
#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rfz/container.hpp"
#include "rfz/errors.hpp"

#include "container_detail.hpp"

namespace rfz {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'Z', '1'};

// A value's shortest round-trip decimal form: (-1)^negative * m * 10^e.
struct Decimal {
  bool negative = false;
  std::uint64_t m = 0;
  int e = 0;
};

std::optional<Decimal> decimal_parts(double v) {
  if (!std::isfinite(v)) return std::nullopt;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
  const std::string_view text(buf, static_cast<std::size_t>(res.ptr - buf));
  Decimal d;
  d.negative = text.front() == '-';
  const auto e_at = text.find('e');
  int digits = 0;
  for (char ch : text.substr(d.negative, e_at - d.negative)) {
    if (ch == '.') continue;
    d.m = d.m * 10 + static_cast<std::uint64_t>(ch - '0');  // at most 17 digits
    ++digits;
  }
  int exp10 = 0;
  std::from_chars(text.data() + e_at + 1 + (text[e_at + 1] == '+'), text.data() + text.size(), exp10);
  d.e = exp10 - (digits - 1);
  return d;
}

double from_decimal(std::int64_t m, int e) {
  const auto text = std::to_string(m) + 'e' + std::to_string(e);
  double v = 0;
  std::from_chars(text.data(), text.data() + text.size(), v);
  return v;
}

std::uint64_t zigzag(std::int64_t v) { return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63); }
std::int64_t unzigzag(std::uint64_t v) { return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1); }

// One value: varint 0 then the raw 64-bit pattern, or, when the shortest
// decimal form has m < 2^54 and e in [-64, 63],
// varint 1 + ((2m + negative) << 7) + (e + 64).
void write_value(ByteWriter& out, double v) {
  const auto d = decimal_parts(v);
  if (d && !(d->m == 0 && d->negative) && d->m < (std::uint64_t{1} << 54) && d->e >= -64 && d->e <= 63) {
    out.varint(1 + (((2 * d->m + d->negative) << 7) | static_cast<std::uint64_t>(d->e + 64)));
  } else {
    out.varint(0);
    out.u64(std::bit_cast<std::uint64_t>(v));
  }
}

double read_value(ByteReader& in) {
  const auto code = in.varint();
  if (code == 0) return std::bit_cast<double>(in.u64());
  const auto body = code - 1;
  const int e = static_cast<int>(body & 0x7F) - 64;
  const auto sm = body >> 7;
  const auto m = static_cast<std::int64_t>(sm >> 1);
  if (m >= (std::int64_t{1} << 54)) throw CorruptContainer("schema: value mantissa out of range");
  return from_decimal((sm & 1) ? -m : m, e);
}

// Doubles as integers whose order matches numeric order (+0 and -0 coincide).
std::int64_t ordered(double v) {
  const auto b = std::bit_cast<std::int64_t>(v);
  return b >= 0 ? b : std::numeric_limits<std::int64_t>::min() - b;
}
double unordered(std::int64_t o) {
  return std::bit_cast<double>(o >= 0 ? o : std::numeric_limits<std::int64_t>::min() - o);
}

constexpr int kMaxUlps = 4;

// Fewest significant digits whose decimal lands within kMaxUlps of v.
// Midpoint thresholds are often a last-bit rounding away from a short decimal.
struct NearDecimal {
  Decimal d;
  int ulps = 0;  // v is this many steps above the decimal's double
};

NearDecimal near_decimal(double v) {
  char buf[64];
  for (int p = 1;; ++p) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, p - 1);
    double back = 0;
    std::from_chars(buf, res.ptr, back);
    const auto gap = ordered(v) - ordered(back);
    if (p < 17 && (gap > kMaxUlps || gap < -kMaxUlps)) continue;
    NearDecimal n{*decimal_parts(back), static_cast<int>(gap)};
    return n;
  }
}

// Sorted value tables (split thresholds, regression fits). When every value
// is finite, not -0, and within reach of a decimal at one shared exponent e:
//   varint 1 ‖ zigzag(e) ‖ per value varint(9 * zigzag(M_i - M_{i-1}) + ulps_i + 4)
// with M_{-1} = 0, |M_i| <= 2^53 and value_i = step(M_i * 10^e, ulps_i).
// Otherwise: varint 0 ‖ one value code each.
struct SharedForm {
  int e = 0;
  std::vector<std::int64_t> m;
  std::vector<int> ulps;
};

std::optional<SharedForm> shared_exponent(std::span<const double> values) {
  std::vector<NearDecimal> parts;
  SharedForm form;
  form.e = std::numeric_limits<int>::max();
  for (double v : values) {
    if (!std::isfinite(v) || (v == 0 && std::signbit(v))) return std::nullopt;
    parts.push_back(near_decimal(v));
    form.e = std::min(form.e, parts.back().d.e);
  }
  for (const auto& n : parts) {
    std::uint64_t m = n.d.m;
    for (int k = n.d.e; k > form.e; --k) {
      if (m > (std::uint64_t{1} << 53) / 10) return std::nullopt;
      m *= 10;
    }
    if (m > (std::uint64_t{1} << 53)) return std::nullopt;
    form.m.push_back(n.d.negative ? -static_cast<std::int64_t>(m) : static_cast<std::int64_t>(m));
    form.ulps.push_back(n.ulps);
  }
  return form;
}

void write_values(ByteWriter& out, std::span<const double> values) {
  out.varint(values.size());
  if (values.empty()) return;
  if (auto form = shared_exponent(values)) {
    out.varint(1);
    out.varint(zigzag(form->e));
    std::int64_t prev = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      out.varint(9 * zigzag(form->m[i] - prev) + static_cast<std::uint64_t>(form->ulps[i] + kMaxUlps));
      prev = form->m[i];
    }
  } else {
    out.varint(0);
    for (double v : values) write_value(out, v);
  }
}

std::vector<double> read_values(ByteReader& in) {
  const auto n = in.varint();
  if (n > in.remaining()) throw CorruptContainer("schema: implausible value table size");
  std::vector<double> values;
  if (n == 0) return values;
  const auto mode = in.varint();
  if (mode == 0) {
    for (std::uint64_t k = 0; k < n; ++k) values.push_back(read_value(in));
  } else if (mode == 1) {
    const auto e = unzigzag(in.varint());
    if (e < -400 || e > 400) throw CorruptContainer("schema: value exponent out of range");
    constexpr std::int64_t limit = std::int64_t{1} << 53;
    std::int64_t m = 0;
    for (std::uint64_t k = 0; k < n; ++k) {
      const auto code = in.varint();
      const auto step = unzigzag(code / 9);
      if (step > 2 * limit || step < -2 * limit) throw CorruptContainer("schema: value step out of range");
      m += step;
      if (m > limit || m < -limit) throw CorruptContainer("schema: value out of range");
      const auto ulps = static_cast<std::int64_t>(code % 9) - kMaxUlps;
      const double v = unordered(ordered(from_decimal(m, static_cast<int>(e))) + ulps);
      if (!std::isfinite(v)) throw CorruptContainer("schema: value out of range");
      values.push_back(v);
    }
  } else {
    throw CorruptContainer("schema: unknown value table mode");
  }
  return values;
}

void write_schema(ByteWriter& out, const CompressedContainer& c) {
  out.varint(c.schema.n_obs);
  out.varint(c.schema.size());
  for (const auto& v : c.schema.variables) {
    out.string(v.name);
    out.u8(static_cast<std::uint8_t>(v.kind));
    if (v.kind == VariableKind::categorical) {
      out.varint(v.categories.size());
      for (const auto& cat : v.categories) out.string(cat);
    }
  }
  out.varint(c.class_labels.size());
  for (const auto& l : c.class_labels) out.string(l);

  for (const auto& table : c.values.splits) {
    if (table.kind() == VariableKind::numerical) {
      write_values(out, table.thresholds());
    } else {
      out.varint(table.size());
      for (const auto& s : table.sets()) out.bytes(s.to_bytes());
    }
  }
  if (c.task == Task::regression) {
    write_values(out, c.values.fits.values());
  }
}

void read_schema(ByteReader& in, CompressedContainer& c, std::size_t d) {
  c.schema.n_obs = in.varint();
  if (in.varint() != d) throw CorruptContainer("schema: variable count disagrees with the header");
  for (std::size_t j = 0; j < d; ++j) {
    Variable v;
    v.name = in.string();
    const auto kind = in.u8();
    if (kind > 1) throw CorruptContainer("schema: unknown variable kind");
    v.kind = static_cast<VariableKind>(kind);
    if (v.kind == VariableKind::categorical) {
      const auto n = in.varint();
      if (n > in.remaining()) throw CorruptContainer("schema: implausible category count");
      for (std::uint64_t k = 0; k < n; ++k) v.categories.push_back(in.string());
    }
    c.schema.variables.push_back(std::move(v));
  }
  const auto n_labels = in.varint();
  if (n_labels > in.remaining()) throw CorruptContainer("schema: implausible label count");
  for (std::uint64_t k = 0; k < n_labels; ++k) c.class_labels.push_back(in.string());

  for (std::size_t j = 0; j < d; ++j) {
    const auto& var = c.schema.variables[j];
    SplitValueTable table;
    if (var.kind == VariableKind::numerical) {
      const auto values = read_values(in);
      for (double v : values)
        if (std::isnan(v)) throw CorruptContainer("schema: NaN split threshold");
      table = SplitValueTable(values);
      if (table.size() != values.size() || table.thresholds() != values)
        throw CorruptContainer("schema: split table not sorted");
    } else {
      const auto n = in.varint();
      if (n > in.remaining()) throw CorruptContainer("schema: implausible split table size");
      const auto width = (var.categories.size() + 7) / 8;
      std::vector<CategorySet> sets;
      for (std::uint64_t k = 0; k < n; ++k) {
        const auto raw = in.bytes(width);
        try {
          sets.push_back(CategorySet::from_bytes(raw, var.categories.size()));
        } catch (const std::invalid_argument&) {
          throw CorruptContainer("schema: category set names a category past the variable's range");
        }
      }
      table = SplitValueTable(sets);
      if (table.size() != n || table.sets() != sets) throw CorruptContainer("schema: split table not sorted");
    }
    c.values.splits.push_back(std::move(table));
  }
  if (c.task == Task::regression) {
    const auto values = read_values(in);
    const auto n = values.size();
    c.values.fits = FitValueTable::for_values(values);
    if (c.values.fits.size() != n) throw CorruptContainer("schema: fit table not sorted");
    for (std::size_t k = 0; k < n; ++k)
      if (!same_bits(c.values.fits.values()[k], values[k])) throw CorruptContainer("schema: fit table not sorted");
  } else {
    c.values.fits = FitValueTable::for_classes(c.class_labels.size());
  }
}

// varint K, then for K > 1: varint M and M (depth, father + 1, cluster)
// triples, then K coders.
void write_family(ByteWriter& out, const FamilyCoders& f) {
  out.varint(f.cluster_count());
  if (f.cluster_count() > 1) {
    out.varint(f.contexts.size());
    for (std::size_t i = 0; i < f.contexts.size(); ++i) {
      out.varint(f.contexts[i].depth);
      out.varint(static_cast<std::uint64_t>(f.contexts[i].father + 1));
      out.varint(f.cluster[i]);
    }
  }
  if (f.arithmetic())
    for (auto p : f.p1) out.u16(p);
  else
    for (const auto& t : f.tables) t.write(out);
}

FamilyCoders read_family(ByteReader& in, std::size_t d, std::size_t alphabet, bool arithmetic) {
  FamilyCoders f;
  const auto k = in.varint();
  if (k > in.remaining()) throw CorruptContainer("models: implausible cluster count");
  if (k > 1) {
    const auto m = in.varint();
    if (m > in.remaining()) throw CorruptContainer("models: implausible context count");
    if (k > m) throw CorruptContainer("models: more clusters than contexts");
    for (std::uint64_t i = 0; i < m; ++i) {
      Context ctx;
      const auto depth = in.varint();
      const auto father = in.varint();
      if (depth > 0xFFFF || father > d) throw CorruptContainer("models: context out of range");
      ctx.depth = static_cast<std::uint32_t>(depth);
      ctx.father = static_cast<std::int32_t>(father) - 1;
      if (!f.contexts.empty() && !(f.contexts.back() < ctx)) throw CorruptContainer("models: contexts not sorted");
      f.contexts.push_back(ctx);
      const auto cl = in.varint();
      if (cl >= k) throw CorruptContainer("models: cluster id out of range");
      f.cluster.push_back(static_cast<std::uint32_t>(cl));
    }
  }
  for (std::uint64_t i = 0; i < k; ++i) {
    if (arithmetic) {
      const auto p = in.u16();
      if (p == 0) throw CorruptContainer("models: zero probability");
      f.p1.push_back(p);
    } else {
      auto table = HuffmanTable::read(in);
      if (table.alphabet() != alphabet) throw CorruptContainer("models: code table alphabet mismatch");
      f.tables.push_back(std::move(table));
    }
  }
  return f;
}

// Prefix-coded payloads: the total bit count only; per-tree lengths are
// recovered at parse. Range-coded: one length per tree.
void write_index(ByteWriter& out, const CompressedContainer& c) {
  if (c.fit_coder == FitCoder::huffman) {
    out.varint(c.payload.size);
    return;
  }
  for (auto bits : c.index) out.varint(bits);
}

struct Sections {
  std::uint32_t schema = 0, structure = 0, models = 0, index = 0;
};

}  // namespace

std::vector<std::uint8_t> CompressedContainer::serialize() const {
  ByteWriter schema_w, structure_w, models_w, index_w;
  write_schema(schema_w, *this);
  structure.write(structure_w);
  write_family(models_w, names);
  for (const auto& s : splits) write_family(models_w, s);
  write_family(models_w, fits);
  write_index(index_w, *this);

  ByteWriter out;
  out.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  out.u8(kContainerVersion);
  out.u8(static_cast<std::uint8_t>(task));
  out.u8(static_cast<std::uint8_t>(fit_coder));
  out.u8(0);
  out.u32(tree_count);
  out.u16(static_cast<std::uint16_t>(schema.size()));
  out.u16(max_depth);
  for (const auto* w : {&schema_w, &structure_w, &models_w, &index_w}) {
    if (w->size() > 0xFFFFFFFFull) throw UsageError("container section exceeds 4 GiB");
    out.u32(static_cast<std::uint32_t>(w->size()));
  }
  for (auto* w : {&schema_w, &structure_w, &models_w, &index_w}) out.bytes(w->buffer());
  out.bytes(std::span(payload.bytes.data(), static_cast<std::size_t>((payload.size + 7) / 8)));
  return std::move(out).take();
}

CompressedContainer CompressedContainer::parse(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  if (bytes.size() < kHeaderBytes + kSectionTableBytes) throw CorruptContainer("file shorter than the header");
  auto magic = in.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw CorruptContainer("bad magic (not an RFZ1 container)");
  if (in.u8() != kContainerVersion) throw CorruptContainer("unsupported container version");
  CompressedContainer c;
  const auto task = in.u8();
  if (task > 1) throw CorruptContainer("unknown task");
  c.task = static_cast<Task>(task);
  const auto coder = in.u8();
  if (coder != static_cast<std::uint8_t>(FitCoder::huffman) && coder != static_cast<std::uint8_t>(FitCoder::arithmetic))
    throw CorruptContainer("unknown fit coder");
  c.fit_coder = static_cast<FitCoder>(coder);
  if (in.u8() != 0) throw CorruptContainer("reserved header byte is not zero");
  c.tree_count = in.u32();
  const std::size_t d = in.u16();
  c.max_depth = in.u16();

  Sections s{in.u32(), in.u32(), in.u32(), in.u32()};
  auto section = [&](std::uint32_t len, const char* name) {
    if (len > in.remaining()) throw CorruptContainer(std::string(name) + " section truncated");
    return ByteReader(in.bytes(len));
  };
  auto finish = [](const ByteReader& r, const char* name) {
    if (!r.at_end()) throw CorruptContainer(std::string(name) + " section has trailing bytes");
  };

  auto schema_r = section(s.schema, "schema");
  const auto schema_bytes = bytes.subspan(kHeaderBytes + kSectionTableBytes, s.schema);
  read_schema(schema_r, c, d);
  finish(schema_r, "schema");
  ByteWriter again;
  write_schema(again, c);
  if (!std::ranges::equal(again.buffer(), schema_bytes)) throw CorruptContainer("schema: non-canonical encoding");
  if (c.task == Task::classification && c.class_labels.empty())
    throw CorruptContainer("classification container without class labels");
  if (c.task == Task::regression && !c.class_labels.empty())
    throw CorruptContainer("regression container with class labels");
  if (c.fit_coder == FitCoder::arithmetic && c.class_labels.size() != 2)
    throw CorruptContainer("arithmetic fit coder on a non-binary container");

  auto structure_r = section(s.structure, "structure");
  c.structure = StructureStream::read(structure_r, c.tree_count);
  finish(structure_r, "structure");

  auto models_r = section(s.models, "models");
  c.names = read_family(models_r, d, d, false);
  for (std::size_t j = 0; j < d; ++j) c.splits.push_back(read_family(models_r, d, c.values.splits[j].size(), false));
  c.fits = read_family(models_r, d, c.values.fits.size(), c.fit_coder == FitCoder::arithmetic);
  finish(models_r, "models");

  auto index_r = section(s.index, "index");
  std::uint64_t bits = 0;
  const bool walked = c.fit_coder == FitCoder::huffman;
  if (walked) {
    bits = index_r.varint();
    if (bits > (std::uint64_t{1} << 48)) throw CorruptContainer("index: implausible payload length");
  } else {
    for (std::uint32_t t = 0; t < c.tree_count; ++t) {
      const auto len = index_r.varint();
      if (len > (std::uint64_t{1} << 48)) throw CorruptContainer("index: implausible segment length");
      bits += len;
      c.index.push_back(len);
    }
  }
  finish(index_r, "index");

  const auto payload_bytes = (bits + 7) / 8;
  if (payload_bytes > in.remaining()) throw CorruptContainer("payload truncated");
  auto p = in.bytes(static_cast<std::size_t>(payload_bytes));
  c.payload.bytes.assign(p.begin(), p.end());
  c.payload.size = bits;
  if (bits % 8 != 0 && (c.payload.bytes.back() & (0xFFu >> (bits % 8))) != 0)
    throw CorruptContainer("payload padding bits are not zero");
  if (walked) c.index = detail::walk_segments(c);
  return c;
}

// ---------------------------------------------------------------------------

SizeReport inspect(const CompressedContainer& c) {
  const auto bytes = c.serialize();
  ByteReader in(bytes);
  in.bytes(kHeaderBytes);
  Sections s{in.u32(), in.u32(), in.u32(), in.u32()};

  SizeReport r;
  r.total = bytes.size();
  r.trees = c.tree_count;
  r.structure = s.structure;
  const auto spent = payload_breakdown(c);
  const auto padding = ((c.payload.size + 7) / 8) * 8 - c.payload.size;
  r.names = static_cast<double>(spent.names) / 8.0;
  r.splits = static_cast<double>(spent.splits) / 8.0;
  r.fits = static_cast<double>(spent.fits + padding) / 8.0;
  r.dictionary = static_cast<double>(std::uint64_t{s.schema} + s.models + s.index);
  r.name_clusters = c.names.cluster_count();
  for (const auto& f : c.splits) r.split_clusters.push_back(f.cluster_count());
  r.fit_clusters = c.fits.cluster_count();
  r.fit_coder = to_string(c.fit_coder);
  return r;
}

SizeReport inspect(std::span<const std::uint8_t> bytes) { return inspect(CompressedContainer::parse(bytes)); }

std::string SizeReport::to_text() const {
  std::ostringstream os;
  auto line = [&](const char* name, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-12s %14.3f B  %6.2f%%\n", name, v,
                  total ? 100.0 * v / static_cast<double>(total) : 0.0);
    os << buf;
  };
  line("structure", structure);
  line("names", names);
  line("splits", splits);
  line("fits", fits);
  line("dictionary", dictionary);
  line("header", static_cast<double>(kHeaderBytes + kSectionTableBytes));
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-12s %14llu B\n", "total", static_cast<unsigned long long>(total));
  os << buf;
  os << "trees " << trees << ", fit coder " << fit_coder << ", clusters: names " << name_clusters << ", fits "
     << fit_clusters << ", splits [";
  for (std::size_t j = 0; j < split_clusters.size(); ++j) os << (j ? " " : "") << split_clusters[j];
  os << "]\n";
  return os.str();
}

std::string SizeReport::to_json() const {
  nlohmann::ordered_json j;
  j["structure"] = structure;
  j["names"] = names;
  j["splits"] = splits;
  j["fits"] = fits;
  j["dictionary"] = dictionary;
  j["header"] = kHeaderBytes + kSectionTableBytes;
  j["total"] = total;
  j["trees"] = trees;
  j["fit_coder"] = fit_coder;
  j["clusters"] = {{"names", name_clusters}, {"splits", split_clusters}, {"fits", fit_clusters}};
  return j.dump(2);
}

}  // namespace rfz
