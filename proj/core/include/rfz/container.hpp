#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfz/bitio.hpp"
#include "rfz/context_models.hpp"
#include "rfz/forest.hpp"
#include "rfz/huffman.hpp"
#include "rfz/range_coder.hpp"
#include "rfz/structure_stream.hpp"

namespace rfz {

inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr std::size_t kSectionTableBytes = 16;

enum class FitCoder : std::uint8_t { automatic = 0, huffman = 1, arithmetic = 2 };

const char* to_string(FitCoder coder) noexcept;
FitCoder parse_fit_coder(std::string_view name);  // throws UsageError

struct CompressOptions {
  std::size_t k_max = 32;
  std::uint64_t seed = 0;
  unsigned restarts = 8;
  FitCoder fit_coder = FitCoder::automatic;
};

/// Coders of one stream family: which cluster each occupied context uses,
/// and one coder per cluster. With a single cluster the map is left empty.
struct FamilyCoders {
  std::vector<Context> contexts;      // sorted
  std::vector<std::uint32_t> cluster; // parallel to contexts
  std::vector<HuffmanTable> tables;   // Huffman families
  std::vector<Prob16> p1;             // arithmetic-coded fits

  bool arithmetic() const noexcept { return !p1.empty(); }
  std::size_t cluster_count() const noexcept { return arithmetic() ? p1.size() : tables.size(); }
  /// Throws CorruptContainer if the context has no entry.
  std::uint32_t cluster_of(Context ctx) const;

  bool operator==(const FamilyCoders&) const = default;
};

/// Payload bits spent on each stream, tallied by decoding.
struct StreamBits {
  std::uint64_t names = 0;
  std::uint64_t splits = 0;
  std::uint64_t fits = 0;

  std::uint64_t total() const noexcept { return names + splits + fits; }
};

/// In-memory form of a .rfz file (byte layout in docs/container.md).
struct CompressedContainer {
  Task task = Task::classification;
  FitCoder fit_coder = FitCoder::huffman;  // coder actually used for fits
  std::uint32_t tree_count = 0;
  std::uint16_t max_depth = 0;

  VariableSchema schema;
  std::vector<std::string> class_labels;
  ValueTables values;
  StructureStream structure;
  FamilyCoders names;
  std::vector<FamilyCoders> splits;  // one per variable
  FamilyCoders fits;
  std::vector<std::uint64_t> index;  // payload bits per tree
  Bits payload;

  /// Bit offset of each tree's first payload bit.
  std::vector<std::uint64_t> tree_offsets() const;

  std::vector<std::uint8_t> serialize() const;
  /// Throws CorruptContainer on any malformed or truncated input. Bytes
  /// after the payload are ignored.
  static CompressedContainer parse(std::span<const std::uint8_t> bytes);

  bool operator==(const CompressedContainer&) const = default;
};

CompressedContainer compress(const Forest& forest, const CompressOptions& opts = {});
Forest decompress(const CompressedContainer& c);

/// Which parts of the container a prediction touched.
struct AccessStats {
  std::size_t trees_touched = 0;
  std::size_t frames_decoded = 0;
  std::vector<std::uint32_t> trees;  // ids in visiting order
};

/// Same result as predict(decompress(c), x), decoding only the structure
/// and payload of each tree, and within a tree only up to the last node on
/// the decision path.
Fit predict_compressed(const CompressedContainer& c, std::span<const std::optional<double>> x,
                       AccessStats* stats = nullptr);

/// Decodes every tree and attributes each payload bit to its stream.
StreamBits payload_breakdown(const CompressedContainer& c);

/// Section sizes in bytes. structure + names + splits + fits + dictionary
/// equals total minus the fixed 32-byte header and section table.
struct SizeReport {
  double structure = 0;
  double names = 0;
  double splits = 0;
  double fits = 0;
  double dictionary = 0;
  std::uint64_t total = 0;
  std::uint64_t trees = 0;
  std::size_t name_clusters = 0;
  std::vector<std::size_t> split_clusters;
  std::size_t fit_clusters = 0;
  std::string fit_coder;

  std::string to_text() const;
  std::string to_json() const;
};

SizeReport inspect(const CompressedContainer& c);
SizeReport inspect(std::span<const std::uint8_t> bytes);

}  // namespace rfz
