#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "generators.hpp"
#include "rfz/clustering.hpp"
#include "rfz/errors.hpp"

using namespace rfz;

namespace {

ClusteringProblem problem_of(std::vector<EmpiricalDistribution> models, double penalty) {
  ClusteringProblem p;
  p.cost = {penalty / static_cast<double>(models.front().alphabet()), models.front().alphabet()};
  p.models = std::move(models);
  return p;
}

// Straight from the definition: pooled centers, n_i * D(P_i || Q).
double direct_objective(const ClusteringProblem& p, const std::vector<std::uint32_t>& a) {
  const auto K = *std::max_element(a.begin(), a.end()) + 1;
  std::vector<std::vector<double>> pooled(K, std::vector<double>(p.models[0].alphabet(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t s = 0; s < pooled[a[i]].size(); ++s) pooled[a[i]][s] += static_cast<double>(p.models[i].counts[s]);
  for (auto& q : pooled) {
    double t = 0;
    for (double v : q) t += v;
    for (double& v : q) v /= t;
  }
  double obj = p.penalty() * K;
  for (std::size_t i = 0; i < a.size(); ++i)
    obj += static_cast<double>(p.models[i].total()) * kl_divergence(p.models[i].probabilities(), pooled[a[i]]);
  return obj;
}

// Exhaustive minimum over all set partitions (restricted growth strings).
double brute_force(const ClusteringProblem& p) {
  const auto M = p.models.size();
  std::vector<std::uint32_t> a(M, 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t i, std::uint32_t used) {
    if (i == M) {
      best = std::min(best, direct_objective(p, a));
      return;
    }
    for (std::uint32_t c = 0; c <= used && c < p.k_max; ++c) {
      a[i] = c;
      rec(i + 1, std::max(used, c + 1));
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("identical models collapse to one cluster") {
  const auto p = problem_of(std::vector<EmpiricalDistribution>(5, EmpiricalDistribution({3, 1, 4})), 10);
  const auto r = cluster_search(p);
  CHECK(r.k == 1);
  CHECK(r.divergence == doctest::Approx(0).epsilon(1e-12));
  CHECK(r.objective == doctest::Approx(10));
  // asking for more clusters than distinct models drops the empties
  CHECK(cluster_fixed_k(p, 3).k == 1);
}

TEST_CASE("k = M costs exactly the dictionary penalty") {
  std::vector<EmpiricalDistribution> ms{EmpiricalDistribution({5, 1}), EmpiricalDistribution({1, 5}),
                                        EmpiricalDistribution({2, 2}), EmpiricalDistribution({9, 0})};
  const auto p = problem_of(ms, 7);
  const auto r = cluster_fixed_k(p, 4);
  CHECK(r.k == 4);
  CHECK(r.divergence == doctest::Approx(0).epsilon(1e-12));
  CHECK(r.objective == doctest::Approx(7 * 4));
}

TEST_CASE("K selection follows the closed form") {
  // Three copies each of [10, 0] and [0, 10]. One cluster costs 60 bits of
  // divergence (each model pays 10 * 1 bit), two clusters cost nothing.
  std::vector<EmpiricalDistribution> ms;
  for (int i = 0; i < 3; ++i) {
    ms.emplace_back(std::vector<std::uint64_t>{10, 0});
    ms.emplace_back(std::vector<std::uint64_t>{0, 10});
  }
  auto low = cluster_search(problem_of(ms, 50));
  CHECK(low.k == 2);
  CHECK(low.objective == doctest::Approx(100));
  auto high = cluster_search(problem_of(ms, 70));
  CHECK(high.k == 1);
  CHECK(high.divergence == doctest::Approx(60));
  CHECK(high.objective == doctest::Approx(130));
}

TEST_CASE("separated groups match the exhaustive optimum") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t B = 2 + testing::below(rng, 3), groups = 1 + testing::below(rng, 3);
    std::vector<EmpiricalDistribution> ms;
    for (std::size_t g = 0; g < groups; ++g) {
      const auto copies = 1 + testing::below(rng, 3);
      for (std::size_t c = 0; c < copies; ++c) {
        EmpiricalDistribution d(B);
        d.counts[g % B] = 50 + testing::below(rng, 50);
        d.counts[(g + 1) % B] = testing::below(rng, 3);
        ms.push_back(d);
      }
    }
    auto p = problem_of(ms, 2.0 + testing::unit(rng) * 10);
    p.seed = trial;
    const auto r = cluster_search(p);
    CHECK(r.objective == doctest::Approx(brute_force(p)).epsilon(1e-9));
  }
}

TEST_CASE("reported objective agrees with the definition") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EmpiricalDistribution> ms(2 + testing::below(rng, 20), EmpiricalDistribution(4));
    for (auto& m : ms) {
      for (auto& c : m.counts) c = testing::below(rng, 2) ? testing::below(rng, 40) : 0;
      m.counts[0] += 1;
    }
    auto p = problem_of(ms, 3);
    p.seed = trial;
    const auto r = cluster_search(p);
    CHECK(r.assignment.size() == ms.size());
    CHECK(r.objective == doctest::Approx(direct_objective(p, r.assignment)).epsilon(1e-9));
    CHECK(r.objective == doctest::Approx(clustering_objective(p, r.assignment)).epsilon(1e-9));
    CHECK(r.objective == doctest::Approx(r.divergence + p.penalty() * r.k));
    CHECK(std::isfinite(r.objective));
    // never worse than lumping everything together
    CHECK(r.objective <= direct_objective(p, std::vector<std::uint32_t>(ms.size(), 0)) + 1e-9);
    // clusters are numbered by first appearance
    std::uint32_t next = 0;
    for (auto c : r.assignment) {
      CHECK(c <= next);
      if (c == next) ++next;
    }
    CHECK(next == r.k);
  }
}

TEST_CASE("the objective never increases across iterations") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EmpiricalDistribution> ms(5 + testing::below(rng, 40), EmpiricalDistribution(6));
    for (auto& m : ms)
      for (auto& c : m.counts) c = 1 + testing::below(rng, 20);
    auto p = problem_of(ms, 1);
    p.seed = trial;
    const auto r = cluster_fixed_k(p, 1 + testing::below(rng, 6));
    REQUIRE_FALSE(r.trace.empty());
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1] + 1e-9);
  }
}

TEST_CASE("runs are deterministic for a fixed seed") {
  std::mt19937_64 rng(34);
  std::vector<EmpiricalDistribution> ms(30, EmpiricalDistribution(5));
  for (auto& m : ms)
    for (auto& c : m.counts) c = testing::below(rng, 30);
  for (auto& m : ms) m.counts[1] += 1;
  auto p = problem_of(ms, 2);
  p.seed = 99;
  const auto a = cluster_search(p), b = cluster_search(p);
  CHECK(a.assignment == b.assignment);
  CHECK(a.objective == b.objective);
  CHECK(a.trace == b.trace);
}

TEST_CASE("centers") {
  std::vector<EmpiricalDistribution> two{EmpiricalDistribution({1, 0}), EmpiricalDistribution({0, 1})};
  CHECK(center_of(two) == std::vector<double>{0.5, 0.5});
  std::vector<EmpiricalDistribution> weighted{EmpiricalDistribution({3, 0}), EmpiricalDistribution({0, 1})};
  CHECK(center_of(weighted) == std::vector<double>{0.75, 0.25});
}

TEST_CASE("the weighted mean minimizes the within-cluster divergence") {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EmpiricalDistribution> ms(2 + testing::below(rng, 6), EmpiricalDistribution(3));
    for (auto& m : ms)
      for (auto& c : m.counts) c = 1 + testing::below(rng, 20);
    const auto q = center_of(ms);
    auto cost = [&](const std::vector<double>& c) {
      double s = 0;
      for (const auto& m : ms) s += static_cast<double>(m.total()) * kl_divergence(m.probabilities(), c);
      return s;
    };
    const double base = cost(q);
    for (int k = 0; k < 20; ++k) {
      auto pert = q;
      const auto i = testing::below(rng, 3), j = (i + 1) % 3;
      const double eps = std::min(pert[i], 0.05) * testing::unit(rng);
      pert[i] -= eps;
      pert[j] += eps;
      CHECK(cost(pert) >= base - 1e-9);
    }
  }
}

TEST_CASE("input errors") {
  ClusteringProblem empty;
  CHECK_THROWS_AS(cluster_search(empty), DegenerateInput);
  auto p = problem_of({EmpiricalDistribution({1, 2}), EmpiricalDistribution({1, 2, 3})}, 1);
  CHECK_THROWS_AS(cluster_search(p), AlphabetMismatch);
  auto q = problem_of({EmpiricalDistribution({1, 2})}, 1);
  CHECK_THROWS_AS(cluster_fixed_k(q, 0), DegenerateInput);
  CHECK_THROWS_AS(cluster_fixed_k(q, 2), DegenerateInput);
}
