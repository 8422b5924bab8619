#include "rfz/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "random.hpp"
#include "rfz/errors.hpp"

namespace rfz {

namespace {

constexpr std::size_t kMaxCategoricalSubsets = 4096;

std::size_t effective_mtry(const Dataset& data, const TrainConfig& cfg) {
  const auto d = data.schema.size();
  if (cfg.mtry) return cfg.mtry;
  const auto m = data.task == Task::classification ? static_cast<std::size_t>(std::sqrt(static_cast<double>(d)))
                                                   : d / 3;
  return std::clamp<std::size_t>(m, 1, d);
}

void check_inputs(const Dataset& data, const TrainConfig& cfg) {
  const auto d = data.schema.size();
  if (data.rows.empty()) throw DataError("training set is empty");
  if (d == 0) throw DataError("training set has no variables");
  if (data.targets.size() != data.rows.size()) throw DataError("row and target counts differ");
  if (cfg.min_leaf == 0) throw UsageError("min_leaf must be at least 1");
  if (cfg.mtry > d) throw UsageError("mtry exceeds the number of variables");
  if (data.task == Task::classification && data.class_labels.empty()) throw DataError("no class labels");
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    if (data.rows[r].size() != d) throw DataError("row " + std::to_string(r) + " has the wrong width");
    for (std::size_t j = 0; j < d; ++j)
      if (!data.rows[r][j]) throw DataError("missing value in row " + std::to_string(r) + ", variable '" +
                                            data.schema.variables[j].name + "'");
    const auto y = data.targets[r];
    if (!std::isfinite(y)) throw DataError("non-finite target in row " + std::to_string(r));
    if (data.task == Task::classification &&
        (y < 0 || y >= static_cast<double>(data.class_labels.size()) || y != std::floor(y)))
      throw DataError("target in row " + std::to_string(r) + " is not a class index");
  }
}

struct Candidate {
  bool found = false;
  double score = -std::numeric_limits<double>::infinity();  // larger is better
  std::uint32_t variable = 0;
  Split split;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const TrainConfig& cfg, std::uint64_t tree_id)
      : data_(data), cfg_(cfg), mtry_(effective_mtry(data, cfg)),
        rng_(detail::mix_seed(cfg.seed, tree_id)), n_labels_(data.class_labels.size()) {}

  Tree build() {
    const auto n = data_.rows.size();
    std::vector<std::uint32_t> sample(n);
    if (cfg_.bootstrap) {
      for (auto& s : sample) s = static_cast<std::uint32_t>(detail::uniform_below(rng_, n));
      std::sort(sample.begin(), sample.end());
    } else {
      std::iota(sample.begin(), sample.end(), 0u);
    }
    grow(sample, 0);
    return std::move(tree_);
  }

 private:
  double x(std::uint32_t row, std::uint32_t var) const { return *data_.rows[row][var]; }
  double y(std::uint32_t row) const { return data_.targets[row]; }

  Fit node_fit(const std::vector<std::uint32_t>& rows) const {
    if (data_.task == Task::classification) {
      std::vector<std::size_t> counts(n_labels_, 0);
      for (auto r : rows) ++counts[static_cast<std::size_t>(y(r))];
      return ClassLabel{static_cast<std::uint32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin())};
    }
    double sum = 0;
    for (auto r : rows) sum += y(r);
    return sum / static_cast<double>(rows.size());
  }

  bool pure(const std::vector<std::uint32_t>& rows) const {
    for (auto r : rows)
      if (y(r) != y(rows.front())) return false;
    return true;
  }

  // Sufficient statistics of a side: class counts, or (count, sum) of targets.
  struct Side {
    std::vector<double> counts;
    double n = 0, sum = 0, sum_sq_counts = 0;

    void add(double target, bool classification) {
      n += 1;
      if (classification) {
        auto& c = counts[static_cast<std::size_t>(target)];
        sum_sq_counts += 2 * c + 1;
        c += 1;
      } else {
        sum += target;
      }
    }
    void remove(double target, bool classification) {
      n -= 1;
      if (classification) {
        auto& c = counts[static_cast<std::size_t>(target)];
        sum_sq_counts -= 2 * c - 1;
        c -= 1;
      } else {
        sum -= target;
      }
    }
    // n * (1 - gini) for classification; sum^2 / n for regression.
    double purity(bool classification) const {
      if (n == 0) return 0;
      return classification ? sum_sq_counts / n : sum * sum / n;
    }
  };

  Side empty_side() const {
    Side s;
    if (data_.task == Task::classification) s.counts.assign(n_labels_, 0);
    return s;
  }

  void consider(Candidate& best, double score, std::uint32_t var, Split split) const {
    if (!best.found || score > best.score) {
      best = {true, score, var, std::move(split)};
    }
  }

  void numerical(Candidate& best, const std::vector<std::uint32_t>& rows, std::uint32_t var) const {
    const bool cls = data_.task == Task::classification;
    std::vector<std::uint32_t> order(rows);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x(a, var) < x(b, var); });
    Side left = empty_side(), right = empty_side();
    for (auto r : order) right.add(y(r), cls);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      left.add(y(order[i]), cls);
      right.remove(y(order[i]), cls);
      const double a = x(order[i], var), b = x(order[i + 1], var);
      if (a == b) continue;
      if (left.n < static_cast<double>(cfg_.min_leaf) || right.n < static_cast<double>(cfg_.min_leaf)) continue;
      double thr = a + (b - a) / 2;
      if (!(thr > a)) thr = b;
      consider(best, left.purity(cls) + right.purity(cls), var, thr);
    }
  }

  void categorical(Candidate& best, const std::vector<std::uint32_t>& rows, std::uint32_t var) const {
    const bool cls = data_.task == Task::classification;
    const auto universe = data_.schema.variables[var].categories.size();
    std::vector<Side> per_cat(universe, empty_side());
    for (auto r : rows) per_cat[static_cast<std::size_t>(x(r, var))].add(y(r), cls);
    std::vector<std::size_t> present;
    for (std::size_t k = 0; k < universe; ++k)
      if (per_cat[k].n > 0) present.push_back(k);
    if (present.size() < 2) return;

    Side total = empty_side();
    for (auto r : rows) total.add(y(r), cls);
    auto merge = [&](Side s, const Side& o, double sign) {
      s.n += sign * o.n;
      s.sum += sign * o.sum;
      if (cls) {
        s.sum_sq_counts = 0;
        for (std::size_t c = 0; c < s.counts.size(); ++c) {
          s.counts[c] += sign * o.counts[c];
          s.sum_sq_counts += s.counts[c] * s.counts[c];
        }
      }
      return s;
    };

    // Grow the left set one category at a time, keeping the best addition.
    std::vector<bool> in_left(universe, false);
    Side left = empty_side();
    std::size_t evaluated = 0;
    bool have_local = false;
    double local_best = 0;
    for (std::size_t size = 1; size < present.size(); ++size) {
      double step_best = 0;
      std::size_t step_pick = universe;
      Side step_left;
      for (auto k : present) {
        if (in_left[k]) continue;
        if (evaluated++ >= kMaxCategoricalSubsets) break;
        Side l = merge(left, per_cat[k], 1);
        Side r = merge(total, l, -1);
        if (l.n < static_cast<double>(cfg_.min_leaf) || r.n < static_cast<double>(cfg_.min_leaf)) continue;
        const double score = l.purity(cls) + r.purity(cls);
        if (step_pick == universe || score > step_best) {
          step_best = score;
          step_pick = k;
          step_left = l;
        }
      }
      if (step_pick == universe) {
        // no admissible addition yet: take the category that grows the set most evenly
        if (evaluated >= kMaxCategoricalSubsets) break;
        std::size_t pick = universe;
        for (auto k : present)
          if (!in_left[k] && (pick == universe || per_cat[k].n > per_cat[pick].n)) pick = k;
        in_left[pick] = true;
        left = merge(left, per_cat[pick], 1);
        continue;
      }
      if (have_local && step_best <= local_best) break;
      have_local = true;
      local_best = step_best;
      in_left[step_pick] = true;
      left = step_left;
      CategorySet set(universe);
      for (std::size_t k = 0; k < universe; ++k)
        if (in_left[k]) set.insert(k);
      consider(best, step_best, var, set);
      if (evaluated >= kMaxCategoricalSubsets) break;
    }
  }

  std::uint32_t grow(const std::vector<std::uint32_t>& rows, std::size_t depth) {
    const auto id = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[id].fit = node_fit(rows);

    const bool depth_ok = cfg_.max_depth == 0 || depth < cfg_.max_depth;
    if (!depth_ok || rows.size() < 2 * cfg_.min_leaf || pure(rows)) return id;

    // variables tried at this node: partial Fisher-Yates over all d
    const auto d = data_.schema.size();
    std::vector<std::uint32_t> vars(d);
    std::iota(vars.begin(), vars.end(), 0u);
    for (std::size_t i = 0; i < mtry_; ++i) std::swap(vars[i], vars[i + detail::uniform_below(rng_, d - i)]);

    Candidate best;
    for (std::size_t i = 0; i < mtry_; ++i) {
      if (data_.schema.variables[vars[i]].kind == VariableKind::numerical) numerical(best, rows, vars[i]);
      else categorical(best, rows, vars[i]);
    }
    if (!best.found) return id;

    std::vector<std::uint32_t> left, right;
    for (auto r : rows) (goes_left(best.split, x(r, best.variable)) ? left : right).push_back(r);
    tree_.nodes[id].variable = best.variable;
    tree_.nodes[id].split = best.split;
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  const Dataset& data_;
  const TrainConfig& cfg_;
  std::size_t mtry_;
  mutable std::mt19937_64 rng_;
  std::size_t n_labels_;
  Tree tree_;
};

}  // namespace

Tree train_tree(const Dataset& data, const TrainConfig& cfg, std::uint64_t tree_id) {
  check_inputs(data, cfg);
  return TreeBuilder(data, cfg, tree_id).build();
}

Forest train(const Dataset& data, const TrainConfig& cfg) {
  check_inputs(data, cfg);
  Forest f;
  f.schema = data.schema;
  f.schema.n_obs = data.rows.size();
  f.task = data.task;
  if (f.task == Task::classification) f.class_labels = data.class_labels;
  f.trees.reserve(cfg.n_trees);
  for (std::size_t t = 0; t < cfg.n_trees; ++t) f.trees.push_back(TreeBuilder(data, cfg, t).build());
  return f;
}

}  // namespace rfz
