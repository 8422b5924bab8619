#pragma once

#include <compare>
#include <cstdint>
#include <utility>
#include <vector>

#include "rfz/entropy.hpp"
#include "rfz/forest.hpp"

namespace rfz {

inline constexpr std::int32_t kRootFather = -1;

/// Coding context of a node: its depth and its parent's split variable
/// (kRootFather at the root).
struct Context {
  std::uint32_t depth = 0;
  std::int32_t father = kRootFather;

  auto operator<=>(const Context&) const = default;
};

enum class StreamKind : std::uint8_t { names, split, fits };

struct NodeRef {
  std::uint32_t tree = 0;
  std::uint32_t node = 0;  // preorder index
  bool operator==(const NodeRef&) const = default;
};

/// Empirical distribution of one stream's symbols within one context.
struct ConditionalModel {
  Context context;
  StreamKind kind = StreamKind::names;
  std::uint32_t variable = 0;  // split models only
  EmpiricalDistribution dist;
  std::vector<NodeRef> members;  // forest order, preorder within a tree

  std::uint64_t samples() const noexcept { return members.size(); }
  bool operator==(const ConditionalModel&) const = default;
};

/// Total order on doubles that agrees with < and puts -0.0 before +0.0.
std::uint64_t ordered_key(double value) noexcept;

/// Sorted, duplicate-free split values of one variable.
class SplitValueTable {
 public:
  SplitValueTable() = default;
  explicit SplitValueTable(VariableKind kind) : kind_(kind) {}
  SplitValueTable(std::vector<double> thresholds);        // sorts + dedupes
  SplitValueTable(std::vector<CategorySet> sets);         // sorts + dedupes

  VariableKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept {
    return kind_ == VariableKind::numerical ? thresholds_.size() : sets_.size();
  }
  /// Throws std::out_of_range if the value is not in the table.
  std::uint32_t index_of(const Split& split) const;
  Split value(std::uint32_t index) const;

  const std::vector<double>& thresholds() const noexcept { return thresholds_; }
  const std::vector<CategorySet>& sets() const noexcept { return sets_; }

  bool operator==(const SplitValueTable& other) const;

 private:
  VariableKind kind_ = VariableKind::numerical;
  std::vector<double> thresholds_;
  std::vector<CategorySet> sets_;
};

/// Fit alphabet: class indices for classification, distinct 64-bit
/// patterns (sorted) for regression.
class FitValueTable {
 public:
  FitValueTable() = default;
  static FitValueTable for_classes(std::size_t n_labels);
  static FitValueTable for_values(std::vector<double> values);  // sorts + dedupes by bit pattern

  Task task() const noexcept { return task_; }
  std::size_t size() const noexcept { return task_ == Task::classification ? n_labels_ : values_.size(); }
  std::uint32_t index_of(const Fit& fit) const;
  Fit value(std::uint32_t index) const;
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const FitValueTable& other) const;

 private:
  Task task_ = Task::classification;
  std::size_t n_labels_ = 0;
  std::vector<double> values_;
};

struct ValueTables {
  std::vector<SplitValueTable> splits;  // one per variable
  FitValueTable fits;

  static ValueTables build(const Forest& forest);
  bool operator==(const ValueTables&) const = default;
};

struct ModelSet {
  std::vector<ConditionalModel> names;                // sorted by context
  std::vector<std::vector<ConditionalModel>> splits;  // per variable, sorted by context
  std::vector<ConditionalModel> fits;                 // sorted by context
  ValueTables values;
};

/// Per-node depth and parent split variable for one tree.
struct NodeContexts {
  std::vector<std::uint32_t> depth;
  std::vector<std::int32_t> father;
};
NodeContexts node_contexts(const Tree& tree);

/// Tallies name, split and fit symbols per occupied context.
ModelSet extract_models(const Forest& forest);

/// Upper bounds on the number of name models (d*T) and split models (d*d*T).
std::pair<std::uint64_t, std::uint64_t> model_count_bound(std::uint64_t d, std::uint64_t T);

}  // namespace rfz
