#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "generators.hpp"
#include "rfz/context_models.hpp"
#include "rfz/errors.hpp"

using namespace rfz;

namespace {

Forest one_split_forest(std::size_t copies) {
  Forest f;
  f.schema.variables = {{"x1", VariableKind::numerical, {}}};
  f.task = Task::classification;
  f.class_labels = {"a", "b"};
  f.trees.assign(copies, testing::tree_from_sexpr("(N L L)"));
  for (auto& t : f.trees) {
    t.nodes[0].variable = 0;
    t.nodes[0].split = 5.0;
    t.nodes[0].fit = ClassLabel{1};
    t.nodes[1].fit = ClassLabel{0};
    t.nodes[2].fit = ClassLabel{1};
  }
  return f;
}

}  // namespace

TEST_CASE("two identical one-split trees") {
  const auto m = extract_models(one_split_forest(2));
  REQUIRE(m.names.size() == 1);
  CHECK(m.names[0].context == Context{0, kRootFather});
  CHECK(m.names[0].dist.counts == std::vector<std::uint64_t>{2});

  REQUIRE(m.splits.size() == 1);
  REQUIRE(m.splits[0].size() == 1);
  CHECK(m.splits[0][0].dist.counts == std::vector<std::uint64_t>{2});
  CHECK(m.values.splits[0].thresholds() == std::vector<double>{5.0});

  REQUIRE(m.fits.size() == 2);
  CHECK(m.fits[0].context == Context{0, kRootFather});
  CHECK(m.fits[0].dist.counts == std::vector<std::uint64_t>{0, 2});
  CHECK(m.fits[1].context == Context{1, 0});
  CHECK(m.fits[1].dist.counts == std::vector<std::uint64_t>{2, 2});
  CHECK(m.fits[1].members == std::vector<NodeRef>{{0, 1}, {0, 2}, {1, 1}, {1, 2}});
}

TEST_CASE("a single leaf yields one fit model and nothing else") {
  Forest f;
  f.schema.variables = {{"x", VariableKind::numerical, {}}};
  f.task = Task::regression;
  Tree t;
  t.nodes.resize(1);
  t.nodes[0].fit = 4.5;
  f.trees = {t};
  const auto m = extract_models(f);
  CHECK(m.names.empty());
  CHECK(m.splits[0].empty());
  REQUIRE(m.fits.size() == 1);
  CHECK(m.fits[0].samples() == 1);
  CHECK(m.values.fits.values() == std::vector<double>{4.5});
}

TEST_CASE("node contexts") {
  const auto t = testing::tree_from_sexpr("N(N(L,L),L)");
  auto tree = t;
  tree.nodes[0].variable = 3;
  tree.nodes[1].variable = 1;
  const auto c = node_contexts(tree);
  CHECK(c.depth == std::vector<std::uint32_t>{0, 1, 2, 2, 1});
  CHECK(c.father == std::vector<std::int32_t>{-1, 3, 1, 1, 3});
}

TEST_CASE("model count bounds") {
  CHECK(model_count_bound(4, 10) == std::pair<std::uint64_t, std::uint64_t>{40, 160});
}

TEST_CASE("samples are conserved and occupied contexts stay within the bounds") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 60; ++i) {
    const auto f = testing::random_forest(rng, {.max_trees = 30, .max_depth = 10});
    const auto m = extract_models(f);
    const std::uint64_t d = f.schema.size(), T = f.max_depth();

    std::uint64_t internal = 0, nodes = 0;
    for (const auto& t : f.trees) {
      internal += t.internal_count();
      nodes += t.nodes.size();
    }
    std::uint64_t name_samples = 0, split_samples = 0, fit_samples = 0;
    std::set<NodeRef, decltype([](NodeRef a, NodeRef b) { return std::pair(a.tree, a.node) < std::pair(b.tree, b.node); })>
        seen;
    for (const auto& nm : m.names) {
      CHECK(nm.dist.total() == nm.samples());
      name_samples += nm.samples();
    }
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(m.splits[j].size() <= d * T + 1);
      for (const auto& sm : m.splits[j]) {
        CHECK(sm.variable == j);
        CHECK(sm.dist.alphabet() == m.values.splits[j].size());
        CHECK(sm.dist.total() == sm.samples());
        split_samples += sm.samples();
        for (auto r : sm.members) CHECK(f.trees[r.tree].nodes[r.node].variable == j);
      }
    }
    for (const auto& fm : m.fits) {
      CHECK(fm.dist.total() == fm.samples());
      fit_samples += fm.samples();
      for (auto r : fm.members) seen.insert(r);
    }
    CHECK(name_samples == internal);
    CHECK(split_samples == internal);
    CHECK(fit_samples == nodes);
    CHECK(seen.size() == nodes);

    const auto [name_bound, split_bound] = model_count_bound(d, std::max<std::uint64_t>(T, 1));
    CHECK(m.names.size() <= name_bound);
    std::uint64_t split_models = 0;
    for (const auto& s : m.splits) split_models += s.size();
    CHECK(split_models <= split_bound);
    CHECK(m.fits.size() <= d * T + 1);

    for (std::size_t k = 1; k < m.names.size(); ++k) CHECK(m.names[k - 1].context < m.names[k].context);
  }
}

TEST_CASE("ordered keys sort doubles and separate signed zeros") {
  const std::vector<double> v{-std::numeric_limits<double>::infinity(), -1e300, -1.5, -0.0, 0.0, 1e-310, 2.0,
                              std::numeric_limits<double>::infinity()};
  for (std::size_t i = 1; i < v.size(); ++i) CHECK(ordered_key(v[i - 1]) < ordered_key(v[i]));
}

TEST_CASE("value tables") {
  const SplitValueTable t(std::vector<double>{3.0, 1.0, 3.0, 2.0});
  CHECK(t.thresholds() == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(t.index_of(Split{2.0}) == 1);
  CHECK_THROWS_AS(t.index_of(Split{2.5}), std::out_of_range);

  const auto fits = FitValueTable::for_values({0.0, -0.0, 1.0, 0.0});
  CHECK(fits.size() == 3);
  CHECK(std::signbit(std::get<double>(fits.value(0))));
  CHECK(fits.index_of(Fit{0.0}) == 1);

  CategorySet a(4), b(4);
  a.insert(0);
  b.insert(1);
  b.insert(2);
  const SplitValueTable cats(std::vector<CategorySet>{b, a, b});
  CHECK(cats.size() == 2);
  CHECK(cats.kind() == VariableKind::categorical);
}
