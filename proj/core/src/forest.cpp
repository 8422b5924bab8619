#include "rfz/forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "rfz/errors.hpp"

namespace rfz {

const char* to_string(VariableKind kind) noexcept {
  return kind == VariableKind::numerical ? "numerical" : "categorical";
}

const char* to_string(Task task) noexcept {
  return task == Task::classification ? "classification" : "regression";
}

std::optional<std::size_t> VariableSchema::index_of(std::string_view name) const {
  for (std::size_t j = 0; j < variables.size(); ++j)
    if (variables[j].name == name) return j;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// CategorySet

CategorySet::CategorySet(std::size_t universe)
    : universe_(universe), words_((universe + 63) / 64, 0) {}

bool CategorySet::contains(std::size_t category) const noexcept {
  if (category >= universe_) return false;
  return (words_[category / 64] >> (category % 64)) & 1u;
}

void CategorySet::insert(std::size_t category) {
  if (category >= universe_) throw std::out_of_range("category outside the set's universe");
  words_[category / 64] |= std::uint64_t{1} << (category % 64);
}

std::size_t CategorySet::count() const noexcept {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::string CategorySet::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (std::size_t w = words_.size(); w-- > 0;) {
    for (int shift = 60; shift >= 0; shift -= 4) {
      auto digit = (words_[w] >> shift) & 0xF;
      if (out.empty() && digit == 0) continue;
      out.push_back(kDigits[digit]);
    }
  }
  return out.empty() ? "0" : out;
}

CategorySet CategorySet::from_hex(std::string_view hex, std::size_t universe) {
  if (hex.empty()) throw std::invalid_argument("empty category bitmask");
  CategorySet set(universe);
  std::size_t bit = 0;
  for (std::size_t i = hex.size(); i-- > 0; bit += 4) {
    char c = hex[i];
    std::uint64_t digit;
    if (c >= '0' && c <= '9') digit = static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') digit = static_cast<std::uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') digit = static_cast<std::uint64_t>(c - 'A' + 10);
    else throw std::invalid_argument("bad hex digit in category bitmask");
    for (int b = 0; b < 4; ++b) {
      if (!((digit >> b) & 1u)) continue;
      if (bit + b >= universe) throw std::invalid_argument("category bitmask names a category beyond the variable's list");
      set.insert(bit + b);
    }
  }
  return set;
}

std::vector<std::uint8_t> CategorySet::to_bytes() const {
  std::vector<std::uint8_t> out((universe_ + 7) / 8, 0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(words_[i / 8] >> (8 * (i % 8)));
  return out;
}

CategorySet CategorySet::from_bytes(std::span<const std::uint8_t> bytes, std::size_t universe) {
  CategorySet set(universe);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    for (int b = 0; b < 8; ++b)
      if ((bytes[i] >> b) & 1u) {
        if (8 * i + b >= universe) throw std::invalid_argument("category bitmask exceeds universe");
        set.insert(8 * i + b);
      }
  return set;
}

std::strong_ordering CategorySet::operator<=>(const CategorySet& other) const {
  if (auto c = universe_ <=> other.universe_; c != 0) return c;
  for (std::size_t w = words_.size(); w-- > 0;)
    if (auto c = words_[w] <=> other.words_[w]; c != 0) return c;
  return std::strong_ordering::equal;
}

// ---------------------------------------------------------------------------
// Tree / Forest

std::size_t Tree::internal_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return !n.is_leaf(); }));
}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0u, 0u}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const Node& n = nodes[i];
    if (!n.is_leaf()) {
      stack.emplace_back(n.right, d + 1);
      stack.emplace_back(n.left, d + 1);
    }
  }
  return best;
}

std::size_t Forest::max_depth() const {
  std::size_t t = 0;
  for (const auto& tree : trees) t = std::max(t, tree.depth());
  return t;
}

std::size_t Forest::node_count() const noexcept {
  std::size_t n = 0;
  for (const auto& tree : trees) n += tree.nodes.size();
  return n;
}

// ---------------------------------------------------------------------------
// validation

namespace {

std::string where(std::size_t tree, std::size_t node) {
  return "tree " + std::to_string(tree) + ", node " + std::to_string(node) + ": ";
}

void check_shape(const Tree& tree, std::size_t t) {
  const auto size = tree.nodes.size();
  if (size == 0) throw InvariantError("tree " + std::to_string(t) + ": no nodes");
  std::vector<std::uint32_t> stack{0};
  std::size_t expected = 0;
  while (!stack.empty()) {
    auto i = stack.back();
    stack.pop_back();
    if (i != expected)
      throw InvariantError(where(t, expected) + "nodes are not stored in preorder");
    ++expected;
    const Node& n = tree.nodes[i];
    if (n.is_leaf()) {
      if (n.right != kNoChild) throw InvariantError(where(t, i) + "leaf with a right child");
      continue;
    }
    if (n.right == kNoChild) throw InvariantError(where(t, i) + "internal node with one child");
    if (n.left >= size || n.right >= size)
      throw InvariantError(where(t, i) + "child index out of range");
    stack.push_back(n.right);
    stack.push_back(n.left);
  }
  if (expected != size)
    throw InvariantError("tree " + std::to_string(t) + ": unreachable nodes after node " +
                         std::to_string(expected));
}

}  // namespace

void validate(const VariableSchema& schema) {
  std::set<std::string_view> names;
  for (std::size_t j = 0; j < schema.variables.size(); ++j) {
    const auto& v = schema.variables[j];
    const auto tag = "variable " + std::to_string(j) + ": ";
    if (v.name.empty()) throw SchemaError(tag + "empty name");
    if (!names.insert(v.name).second) throw SchemaError(tag + "duplicate name '" + v.name + "'");
    if (v.kind == VariableKind::categorical) {
      if (v.categories.size() < 2) throw SchemaError(tag + "categorical variable needs at least 2 categories");
      std::set<std::string_view> labels(v.categories.begin(), v.categories.end());
      if (labels.size() != v.categories.size()) throw SchemaError(tag + "duplicate category label");
    } else if (!v.categories.empty()) {
      throw SchemaError(tag + "numerical variable with categories");
    }
  }
}

void validate(const Forest& forest) {
  validate(forest.schema);
  const auto d = forest.schema.size();
  if (forest.trees.empty()) throw InvariantError("forest has no trees");
  if (forest.task == Task::classification) {
    if (forest.class_labels.empty()) throw InvariantError("classification forest without class labels");
    std::set<std::string_view> labels(forest.class_labels.begin(), forest.class_labels.end());
    if (labels.size() != forest.class_labels.size()) throw InvariantError("duplicate class label");
  } else if (!forest.class_labels.empty()) {
    throw InvariantError("regression forest with class labels");
  }

  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const auto& tree = forest.trees[t];
    check_shape(tree, t);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const Node& n = tree.nodes[i];
      if (forest.task == Task::classification) {
        const auto* label = std::get_if<ClassLabel>(&n.fit);
        if (!label) throw InvariantError(where(t, i) + "numeric fit in a classification forest");
        if (label->index >= forest.class_labels.size())
          throw InvariantError(where(t, i) + "class label index out of range");
      } else {
        const auto* value = std::get_if<double>(&n.fit);
        if (!value) throw InvariantError(where(t, i) + "class fit in a regression forest");
        if (!std::isfinite(*value)) throw InvariantError(where(t, i) + "non-finite fit");
      }
      if (n.is_leaf()) continue;
      if (n.variable >= d) throw InvariantError(where(t, i) + "split variable index out of range");
      const auto& var = forest.schema.variables[n.variable];
      if (var.kind == VariableKind::numerical) {
        const auto* threshold = std::get_if<double>(&n.split);
        if (!threshold)
          throw InvariantError(where(t, i) + "categorical split on numerical variable '" + var.name + "'");
        if (std::isnan(*threshold)) throw InvariantError(where(t, i) + "NaN threshold");
      } else {
        const auto* set = std::get_if<CategorySet>(&n.split);
        if (!set)
          throw InvariantError(where(t, i) + "numerical split on categorical variable '" + var.name + "'");
        if (set->universe() != var.categories.size())
          throw InvariantError(where(t, i) + "category set size does not match variable");
        auto c = set->count();
        if (c == 0 || c == var.categories.size())
          throw InvariantError(where(t, i) + "categorical split must be a proper non-empty subset");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// equality

bool same_bits(double a, double b) noexcept {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_fit(const Fit& a, const Fit& b) noexcept {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<double>(&a)) return same_bits(*x, std::get<double>(b));
  return std::get<ClassLabel>(a) == std::get<ClassLabel>(b);
}

namespace {
bool same_split(const Split& a, const Split& b) noexcept {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<double>(&a)) return same_bits(*x, std::get<double>(b));
  return std::get<CategorySet>(a) == std::get<CategorySet>(b);
}
}  // namespace

bool identical(const Tree& a, const Tree& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const Node& x = a.nodes[i];
    const Node& y = b.nodes[i];
    if (x.left != y.left || x.right != y.right || !same_fit(x.fit, y.fit)) return false;
    if (x.is_leaf()) continue;
    if (x.variable != y.variable || !same_split(x.split, y.split)) return false;
  }
  return true;
}

bool identical(const Forest& a, const Forest& b) {
  if (a.schema != b.schema || a.task != b.task || a.class_labels != b.class_labels ||
      a.trees.size() != b.trees.size())
    return false;
  for (std::size_t t = 0; t < a.trees.size(); ++t)
    if (!identical(a.trees[t], b.trees[t])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// prediction

void check_observation(const VariableSchema& schema, std::span<const std::optional<double>> x) {
  if (x.size() != schema.size())
    throw DimensionError("observation has " + std::to_string(x.size()) + " values, schema has " +
                         std::to_string(schema.size()) + " variables");
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto& var = schema.variables[j];
    if (!x[j] || var.kind != VariableKind::categorical) continue;
    double v = *x[j];
    if (!(v >= 0) || v != std::floor(v) || v >= static_cast<double>(var.categories.size()))
      throw TypeError("value " + std::to_string(v) + " is not a category of '" + var.name + "'");
  }
}

bool goes_left(const Split& split, double value) noexcept {
  if (const auto* threshold = std::get_if<double>(&split)) return value < *threshold;
  return std::get<CategorySet>(split).contains(static_cast<std::size_t>(value));
}

std::uint32_t route(const Tree& tree, std::span<const std::optional<double>> x) {
  std::uint32_t i = 0;
  for (;;) {
    const Node& n = tree.nodes[i];
    if (n.is_leaf()) return i;
    const auto& v = x[n.variable];
    if (!v) return i;
    i = goes_left(n.split, *v) ? n.left : n.right;
  }
}

Fit aggregate(Task task, std::size_t n_labels, std::span<const Fit> per_tree) {
  if (task == Task::regression) {
    double sum = 0.0;
    for (const auto& f : per_tree) sum += std::get<double>(f);
    return sum / static_cast<double>(per_tree.size());
  }
  std::vector<std::size_t> votes(n_labels, 0);
  for (const auto& f : per_tree) ++votes[std::get<ClassLabel>(f).index];
  auto best = std::max_element(votes.begin(), votes.end());  // first maximum = lowest label
  return ClassLabel{static_cast<std::uint32_t>(best - votes.begin())};
}

Fit predict(const Forest& forest, std::span<const std::optional<double>> x) {
  check_observation(forest.schema, x);
  std::vector<Fit> fits;
  fits.reserve(forest.trees.size());
  for (const auto& tree : forest.trees) fits.push_back(tree.nodes[route(tree, x)].fit);
  return aggregate(forest.task, forest.class_labels.size(), fits);
}

}  // namespace rfz
