#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rfz {

enum class VariableKind : std::uint8_t { numerical = 0, categorical = 1 };
enum class Task : std::uint8_t { classification = 0, regression = 1 };

const char* to_string(VariableKind kind) noexcept;
const char* to_string(Task task) noexcept;

struct Variable {
  std::string name;
  VariableKind kind = VariableKind::numerical;
  std::vector<std::string> categories;  // categorical only

  bool operator==(const Variable&) const = default;
};

struct VariableSchema {
  std::vector<Variable> variables;
  std::uint64_t n_obs = 0;  // informational: training observations

  std::size_t size() const noexcept { return variables.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool operator==(const VariableSchema&) const = default;
};

/// Subset of a categorical variable's categories, stored as a bitmask with
/// category 0 in the least significant bit of the first word.
class CategorySet {
 public:
  CategorySet() = default;
  explicit CategorySet(std::size_t universe);

  std::size_t universe() const noexcept { return universe_; }
  bool contains(std::size_t category) const noexcept;
  void insert(std::size_t category);
  std::size_t count() const noexcept;
  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  /// Lower-case hex, most significant digit first, no leading zeros ("0" if empty).
  std::string to_hex() const;
  static CategorySet from_hex(std::string_view hex, std::size_t universe);

  /// Little-endian bytes, ceil(universe / 8) of them.
  std::vector<std::uint8_t> to_bytes() const;
  static CategorySet from_bytes(std::span<const std::uint8_t> bytes, std::size_t universe);

  bool operator==(const CategorySet&) const = default;
  std::strong_ordering operator<=>(const CategorySet& other) const;

 private:
  std::size_t universe_ = 0;
  std::vector<std::uint64_t> words_;
};

struct ClassLabel {
  std::uint32_t index = 0;
  auto operator<=>(const ClassLabel&) const = default;
};

/// A node's prediction value: a class index or a 64-bit real kept bit-exact.
using Fit = std::variant<ClassLabel, double>;

/// Numerical splits send x < threshold to the left child; categorical splits
/// send members of the set to the left child.
using Split = std::variant<double, CategorySet>;

inline constexpr std::uint32_t kNoChild = 0xFFFFFFFFu;

struct Node {
  std::uint32_t variable = 0;  // internal nodes only
  Split split = 0.0;           // internal nodes only
  Fit fit = ClassLabel{};      // every node
  std::uint32_t left = kNoChild;
  std::uint32_t right = kNoChild;

  bool is_leaf() const noexcept { return left == kNoChild; }
};

/// Nodes in preorder: nodes[0] is the root and every internal node's left
/// child immediately follows it.
struct Tree {
  std::vector<Node> nodes;

  std::size_t internal_count() const noexcept;
  std::size_t leaf_count() const noexcept { return nodes.size() - internal_count(); }
  /// Depth of the deepest node, root depth 0.
  std::size_t depth() const;
};

struct Forest {
  VariableSchema schema;
  Task task = Task::classification;
  std::vector<std::string> class_labels;  // classification only
  std::vector<Tree> trees;

  std::size_t tree_count() const noexcept { return trees.size(); }
  std::size_t max_depth() const;
  std::size_t node_count() const noexcept;
};

/// One value per variable; categorical values hold the category index.
/// `std::nullopt` marks a missing value.
using Observation = std::vector<std::optional<double>>;

/// Throws InvariantError (or SchemaError for schema problems) naming the
/// offending tree/node.
void validate(const VariableSchema& schema);
void validate(const Forest& forest);

/// Structural equality with numeric fits and thresholds compared bit-for-bit.
bool identical(const Tree& a, const Tree& b);
bool identical(const Forest& a, const Forest& b);
bool same_bits(double a, double b) noexcept;
bool same_fit(const Fit& a, const Fit& b) noexcept;

/// Throws DimensionError / TypeError if x is not an acceptable input.
void check_observation(const VariableSchema& schema, std::span<const std::optional<double>> x);

/// Whether observation value `value` goes to the left child under `split`.
bool goes_left(const Split& split, double value) noexcept;

/// Index of the node where descent stops: a leaf, or the first node whose
/// split variable is missing in x. Assumes x already checked.
std::uint32_t route(const Tree& tree, std::span<const std::optional<double>> x);

/// Majority vote (ties to the lowest label) or arithmetic mean in tree order.
Fit aggregate(Task task, std::size_t n_labels, std::span<const Fit> per_tree);

Fit predict(const Forest& forest, std::span<const std::optional<double>> x);

}  // namespace rfz
