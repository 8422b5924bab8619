#include "generators.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rfz::testing {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t below(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double normal(std::mt19937_64& rng) {
  double u1 = unit(rng);
  while (u1 <= 0) u1 = unit(rng);
  const double u2 = unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {

double awkward_double(std::mt19937_64& rng) {
  switch (below(rng, 8)) {
    case 0: return -0.0;
    case 1: return 0.0;
    case 2: return std::numeric_limits<double>::denorm_min() * static_cast<double>(1 + below(rng, 1000));
    case 3: return (below(rng, 2) ? 1 : -1) * std::ldexp(1.0 + unit(rng), 900 + static_cast<int>(below(rng, 100)));
    case 4: return 0.1 * static_cast<double>(below(rng, 100));
    default: return (unit(rng) - 0.5) * std::pow(10.0, static_cast<double>(below(rng, 12)) - 4);
  }
}

struct Pools {
  std::vector<std::vector<double>> thresholds;
  std::vector<double> fits;
};

struct Grower {
  std::mt19937_64& rng;
  const Forest& f;
  const Pools& pools;
  std::size_t max_depth;
  double p_split;
  bool spine;
  Tree tree;

  Split random_split(std::uint32_t var) {
    const auto& v = f.schema.variables[var];
    if (v.kind == VariableKind::numerical) {
      const auto& pool = pools.thresholds[var];
      return below(rng, 5) ? pool[below(rng, pool.size())] : awkward_double(rng);
    }
    const auto universe = v.categories.size();
    CategorySet s(universe);
    // proper, non-empty subset
    do {
      s = CategorySet(universe);
      for (std::size_t k = 0; k < universe; ++k)
        if (below(rng, 2)) s.insert(k);
    } while (s.count() == 0 || s.count() == universe);
    return s;
  }

  Fit random_fit() {
    if (f.task == Task::classification) {
      // skewed labels so the fit streams have structure
      auto k = f.class_labels.size();
      auto l = below(rng, 3) ? below(rng, std::min<std::size_t>(k, 2)) : below(rng, k);
      return ClassLabel{static_cast<std::uint32_t>(l)};
    }
    if (below(rng, 6) == 0) return awkward_double(rng);
    return pools.fits[below(rng, pools.fits.size())];
  }

  std::uint32_t grow(std::size_t depth) {
    const auto id = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[id].fit = random_fit();
    bool split = depth < max_depth && (spine ? true : unit(rng) < p_split * std::pow(0.85, static_cast<double>(depth)));
    if (!split) return id;
    const auto var = static_cast<std::uint32_t>(below(rng, f.schema.size()));
    tree.nodes[id].variable = var;
    tree.nodes[id].split = random_split(var);
    std::uint32_t l, r;
    if (spine && below(rng, 2)) {
      spine = false;
      l = grow(depth + 1);
      spine = true;
      r = grow(depth + 1);
    } else {
      l = grow(depth + 1);
      const bool was = spine;
      spine = false;
      r = grow(depth + 1);
      spine = was;
    }
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

}  // namespace

Forest random_forest(std::mt19937_64& rng, const RandomForestOptions& opts) {
  Forest f;
  f.task = opts.task ? *opts.task : (below(rng, 2) ? Task::classification : Task::regression);
  const auto d = 1 + below(rng, opts.max_variables);
  for (std::size_t j = 0; j < d; ++j) {
    Variable v;
    v.name = "x" + std::to_string(j);
    if (opts.allow_categorical && below(rng, 3) == 0) {
      v.kind = VariableKind::categorical;
      const auto c = 2 + below(rng, below(rng, 4) == 0 ? 70 : 9);
      for (std::size_t k = 0; k < c; ++k) v.categories.push_back("c" + std::to_string(k));
    }
    f.schema.variables.push_back(std::move(v));
  }
  f.schema.n_obs = below(rng, 5) ? 1 + below(rng, 5000) : 0;
  if (f.task == Task::classification) {
    const auto k = 2 + below(rng, 4);
    for (std::size_t i = 0; i < k; ++i) f.class_labels.push_back("class" + std::to_string(i));
  }

  Pools pools;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> pool;
    const auto size = 1 + below(rng, 40);
    for (std::size_t k = 0; k < size; ++k) pool.push_back(std::round(normal(rng) * 100) / 10);
    pools.thresholds.push_back(std::move(pool));
  }
  const auto n_fits = 1 + below(rng, 60);
  for (std::size_t k = 0; k < n_fits; ++k) pools.fits.push_back(normal(rng) * 10);

  const auto trees = 1 + below(rng, opts.max_trees);
  const double p_split = 0.3 + 0.7 * unit(rng);
  for (std::size_t t = 0; t < trees; ++t) {
    const bool spine = below(rng, 20) == 0;
    Grower g{rng, f, pools, opts.max_depth, p_split, spine, {}};
    g.grow(0);
    f.trees.push_back(std::move(g.tree));
  }
  return f;
}

Observation random_observation(std::mt19937_64& rng, const Forest& forest, double missing_rate) {
  Observation x;
  for (const auto& v : forest.schema.variables) {
    if (unit(rng) < missing_rate) {
      x.push_back(std::nullopt);
    } else if (v.kind == VariableKind::categorical) {
      x.push_back(static_cast<double>(below(rng, v.categories.size())));
    } else {
      x.push_back(below(rng, 10) == 0 ? awkward_double(rng) : std::round(normal(rng) * 100) / 10);
    }
  }
  return x;
}

Tree random_shape(std::mt19937_64& rng, std::size_t internal) {
  // Grow by replacing a uniformly chosen leaf with an internal node, then
  // lay the result out in preorder.
  std::vector<std::uint32_t> left{kNoChild}, right{kNoChild};
  std::vector<std::uint32_t> leaves{0};
  for (std::size_t i = 0; i < internal; ++i) {
    const auto pick = below(rng, leaves.size());
    const auto node = leaves[pick];
    const auto l = static_cast<std::uint32_t>(left.size());
    left.push_back(kNoChild);
    right.push_back(kNoChild);
    left.push_back(kNoChild);
    right.push_back(kNoChild);
    left[node] = l;
    right[node] = l + 1;
    leaves[pick] = l;
    leaves.push_back(l + 1);
  }
  Tree t;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> stack{{0, kNoChild}};  // (old id, parent new id)
  std::vector<std::uint32_t> pending_right;
  while (!stack.empty()) {
    auto [old, parent] = stack.back();
    stack.pop_back();
    const auto id = static_cast<std::uint32_t>(t.nodes.size());
    t.nodes.emplace_back();
    if (parent != kNoChild) {
      if (t.nodes[parent].left == kNoChild) t.nodes[parent].left = id;
      else t.nodes[parent].right = id;
    }
    if (left[old] != kNoChild) {
      stack.push_back({right[old], id});
      stack.push_back({left[old], id});
    }
  }
  return t;
}

namespace {
struct SexprParser {
  std::string_view s;
  std::size_t pos = 0;
  Tree tree;

  void skip() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == ',' || s[pos] == '\n')) ++pos;
  }
  std::uint32_t parse() {
    skip();
    if (pos >= s.size()) throw std::invalid_argument("sexpr: unexpected end");
    const auto id = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (s[pos] == 'L') {
      ++pos;
      return id;
    }
    bool prefix_paren = s[pos] == '(';
    if (prefix_paren) ++pos, skip();
    if (s[pos] != 'N') throw std::invalid_argument("sexpr: expected N or L");
    ++pos;
    skip();
    bool call = !prefix_paren && pos < s.size() && s[pos] == '(';
    if (call) ++pos;
    const auto l = parse();
    const auto r = parse();
    skip();
    if (prefix_paren || call) {
      if (pos >= s.size() || s[pos] != ')') throw std::invalid_argument("sexpr: expected )");
      ++pos;
    }
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};
}  // namespace

Tree tree_from_sexpr(std::string_view text) {
  SexprParser p{text};
  p.parse();
  p.skip();
  if (p.pos != text.size()) throw std::invalid_argument("sexpr: trailing text");
  return std::move(p.tree);
}

Dataset iris_like(std::uint64_t seed) {
  static constexpr double mean[3][4] = {{5.006, 3.428, 1.462, 0.246}, {5.936, 2.770, 4.260, 1.326}, {6.588, 2.974, 5.552, 2.026}};
  static constexpr double sd[3][4] = {{0.352, 0.379, 0.174, 0.105}, {0.516, 0.314, 0.470, 0.198}, {0.636, 0.322, 0.552, 0.275}};
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.task = Task::classification;
  ds.class_labels = {"setosa", "versicolor", "virginica"};
  ds.target_name = "species";
  for (const char* name : {"sepal_length", "sepal_width", "petal_length", "petal_width"})
    ds.schema.variables.push_back({name, VariableKind::numerical, {}});
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 50; ++i) {
      Observation x;
      for (int j = 0; j < 4; ++j) {
        double v = std::round((mean[c][j] + sd[c][j] * normal(rng)) * 10) / 10;
        x.push_back(std::max(v, 0.1));
      }
      ds.rows.push_back(std::move(x));
      ds.targets.push_back(c);
    }
  ds.schema.n_obs = ds.rows.size();
  return ds;
}

Dataset airfoil_like(std::uint64_t seed) {
  static constexpr double freq[] = {200, 250, 315, 400, 500, 630, 800, 1000, 1250, 1600, 2000,
                                    2500, 3150, 4000, 5000, 6300, 8000, 10000, 12500, 16000, 20000};
  static constexpr double angle[] = {0, 1.5, 2, 2.7, 3, 3.3, 4, 4.2, 4.8, 5.3, 5.4, 6.7, 7.2, 7.3,
                                     8.4, 8.9, 9.5, 9.8, 9.9, 11.2, 12.3, 12.6, 12.7, 15.4, 15.6, 17.4, 19.7, 22.2};
  static constexpr double chord[] = {0.0254, 0.0508, 0.1016, 0.1524, 0.2286, 0.3048};
  static constexpr double velocity[] = {31.7, 39.6, 55.5, 71.3};
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.task = Task::regression;
  ds.target_name = "sound_pressure";
  for (const char* name : {"frequency", "angle", "chord", "velocity", "thickness"})
    ds.schema.variables.push_back({name, VariableKind::numerical, {}});
  for (int i = 0; i < 1503; ++i) {
    const double f = freq[below(rng, std::size(freq))];
    const double a = angle[below(rng, std::size(angle))];
    const double c = chord[below(rng, std::size(chord))];
    const double u = velocity[below(rng, std::size(velocity))];
    const double th = std::round(c * (0.01 + 0.004 * a) * std::pow(u / 71.3, -0.2) * 1e6 * (1 + 0.1 * normal(rng))) / 1e6;
    const double lf = std::log10(f) - 3.2;
    const double y = 132.0 - 7.0 * lf * lf - 35.0 * c + 0.12 * u - 0.35 * a - 120.0 * th +
                     4.0 * std::sin(3.0 * lf + 10 * c) + 2.0 * normal(rng);
    ds.rows.push_back({f, a, c, u, th});
    ds.targets.push_back(std::round(y * 1000) / 1000);
  }
  ds.schema.n_obs = ds.rows.size();
  return ds;
}

}  // namespace rfz::testing
