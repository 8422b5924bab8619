#include "rfz/context_models.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <stdexcept>

namespace rfz {

std::uint64_t ordered_key(double value) noexcept {
  auto bits = std::bit_cast<std::uint64_t>(value);
  return (bits >> 63) ? ~bits : bits | (std::uint64_t{1} << 63);
}

namespace {
bool key_less(double a, double b) noexcept { return ordered_key(a) < ordered_key(b); }
bool key_equal(double a, double b) noexcept { return ordered_key(a) == ordered_key(b); }

void sort_unique(std::vector<double>& v) {
  std::sort(v.begin(), v.end(), key_less);
  v.erase(std::unique(v.begin(), v.end(), key_equal), v.end());
}

std::uint32_t find_value(const std::vector<double>& sorted, double value) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), value, key_less);
  if (it == sorted.end() || !key_equal(*it, value)) throw std::out_of_range("value not in table");
  return static_cast<std::uint32_t>(it - sorted.begin());
}
}  // namespace

// ---------------------------------------------------------------------------

SplitValueTable::SplitValueTable(std::vector<double> thresholds)
    : kind_(VariableKind::numerical), thresholds_(std::move(thresholds)) {
  sort_unique(thresholds_);
}

SplitValueTable::SplitValueTable(std::vector<CategorySet> sets)
    : kind_(VariableKind::categorical), sets_(std::move(sets)) {
  std::sort(sets_.begin(), sets_.end());
  sets_.erase(std::unique(sets_.begin(), sets_.end()), sets_.end());
}

std::uint32_t SplitValueTable::index_of(const Split& split) const {
  if (const auto* threshold = std::get_if<double>(&split)) {
    if (kind_ != VariableKind::numerical) throw std::out_of_range("threshold for a categorical table");
    return find_value(thresholds_, *threshold);
  }
  if (kind_ != VariableKind::categorical) throw std::out_of_range("category set for a numerical table");
  const auto& set = std::get<CategorySet>(split);
  auto it = std::lower_bound(sets_.begin(), sets_.end(), set);
  if (it == sets_.end() || *it != set) throw std::out_of_range("category set not in table");
  return static_cast<std::uint32_t>(it - sets_.begin());
}

Split SplitValueTable::value(std::uint32_t index) const {
  if (kind_ == VariableKind::numerical) return thresholds_.at(index);
  return sets_.at(index);
}

bool SplitValueTable::operator==(const SplitValueTable& other) const {
  if (kind_ != other.kind_ || sets_ != other.sets_ || thresholds_.size() != other.thresholds_.size())
    return false;
  for (std::size_t i = 0; i < thresholds_.size(); ++i)
    if (!same_bits(thresholds_[i], other.thresholds_[i])) return false;
  return true;
}

FitValueTable FitValueTable::for_classes(std::size_t n_labels) {
  FitValueTable t;
  t.task_ = Task::classification;
  t.n_labels_ = n_labels;
  return t;
}

FitValueTable FitValueTable::for_values(std::vector<double> values) {
  FitValueTable t;
  t.task_ = Task::regression;
  t.values_ = std::move(values);
  sort_unique(t.values_);
  return t;
}

std::uint32_t FitValueTable::index_of(const Fit& fit) const {
  if (task_ == Task::classification) {
    auto label = std::get<ClassLabel>(fit).index;
    if (label >= n_labels_) throw std::out_of_range("class label not in table");
    return label;
  }
  return find_value(values_, std::get<double>(fit));
}

Fit FitValueTable::value(std::uint32_t index) const {
  if (task_ == Task::classification) {
    if (index >= n_labels_) throw std::out_of_range("class label index");
    return ClassLabel{index};
  }
  return values_.at(index);
}

bool FitValueTable::operator==(const FitValueTable& other) const {
  if (task_ != other.task_ || n_labels_ != other.n_labels_ || values_.size() != other.values_.size())
    return false;
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!same_bits(values_[i], other.values_[i])) return false;
  return true;
}

ValueTables ValueTables::build(const Forest& forest) {
  const auto d = forest.schema.size();
  std::vector<std::vector<double>> thresholds(d);
  std::vector<std::vector<CategorySet>> sets(d);
  std::vector<double> fit_values;
  for (const auto& tree : forest.trees)
    for (const auto& n : tree.nodes) {
      if (forest.task == Task::regression) fit_values.push_back(std::get<double>(n.fit));
      if (n.is_leaf()) continue;
      if (const auto* t = std::get_if<double>(&n.split)) thresholds[n.variable].push_back(*t);
      else sets[n.variable].push_back(std::get<CategorySet>(n.split));
    }

  ValueTables tables;
  for (std::size_t j = 0; j < d; ++j) {
    if (forest.schema.variables[j].kind == VariableKind::numerical)
      tables.splits.emplace_back(std::move(thresholds[j]));
    else
      tables.splits.emplace_back(std::move(sets[j]));
  }
  tables.fits = forest.task == Task::classification ? FitValueTable::for_classes(forest.class_labels.size())
                                                    : FitValueTable::for_values(std::move(fit_values));
  return tables;
}

// ---------------------------------------------------------------------------

NodeContexts node_contexts(const Tree& tree) {
  NodeContexts ctx;
  ctx.depth.assign(tree.nodes.size(), 0);
  ctx.father.assign(tree.nodes.size(), kRootFather);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const Node& n = tree.nodes[i];
    if (n.is_leaf()) continue;
    for (auto child : {n.left, n.right}) {
      ctx.depth[child] = ctx.depth[i] + 1;
      ctx.father[child] = static_cast<std::int32_t>(n.variable);
    }
  }
  return ctx;
}

namespace {

ConditionalModel& slot(std::map<Context, ConditionalModel>& models, Context ctx, StreamKind kind,
                       std::uint32_t variable, std::size_t alphabet) {
  auto [it, inserted] = models.try_emplace(ctx);
  if (inserted) {
    it->second.context = ctx;
    it->second.kind = kind;
    it->second.variable = variable;
    it->second.dist = EmpiricalDistribution(alphabet);
  }
  return it->second;
}

std::vector<ConditionalModel> flatten(std::map<Context, ConditionalModel>& models) {
  std::vector<ConditionalModel> out;
  out.reserve(models.size());
  for (auto& [ctx, m] : models) out.push_back(std::move(m));
  return out;
}

}  // namespace

ModelSet extract_models(const Forest& forest) {
  const auto d = forest.schema.size();
  ModelSet set;
  set.values = ValueTables::build(forest);

  std::map<Context, ConditionalModel> names;
  std::vector<std::map<Context, ConditionalModel>> splits(d);
  std::map<Context, ConditionalModel> fits;
  const auto fit_alphabet = set.values.fits.size();

  for (std::uint32_t t = 0; t < forest.trees.size(); ++t) {
    const auto& tree = forest.trees[t];
    const auto ctx = node_contexts(tree);
    for (std::uint32_t i = 0; i < tree.nodes.size(); ++i) {
      const Node& n = tree.nodes[i];
      const Context c{ctx.depth[i], ctx.father[i]};
      const NodeRef ref{t, i};

      auto& fm = slot(fits, c, StreamKind::fits, 0, fit_alphabet);
      fm.dist.add(set.values.fits.index_of(n.fit));
      fm.members.push_back(ref);
      if (n.is_leaf()) continue;

      auto& nm = slot(names, c, StreamKind::names, 0, d);
      nm.dist.add(n.variable);
      nm.members.push_back(ref);

      const auto& table = set.values.splits[n.variable];
      auto& sm = slot(splits[n.variable], c, StreamKind::split, n.variable, table.size());
      sm.dist.add(table.index_of(n.split));
      sm.members.push_back(ref);
    }
  }

  set.names = flatten(names);
  set.fits = flatten(fits);
  set.splits.reserve(d);
  for (auto& m : splits) set.splits.push_back(flatten(m));
  return set;
}

std::pair<std::uint64_t, std::uint64_t> model_count_bound(std::uint64_t d, std::uint64_t T) {
  return {d * T, d * d * T};
}

}  // namespace rfz
