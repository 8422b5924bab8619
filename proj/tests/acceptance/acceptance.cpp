// One PASS/FAIL line per acceptance criterion; nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "generators.hpp"
#include "rfz/baseline.hpp"
#include "rfz/clustering.hpp"
#include "rfz/container.hpp"
#include "rfz/errors.hpp"
#include "rfz/huffman.hpp"
#include "rfz/lossy.hpp"
#include "rfz/range_coder.hpp"
#include "rfz/trainer.hpp"
#include "rfz/zaks.hpp"

using namespace rfz;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void run(const char* name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (budget_seconds > 0 && secs > budget_seconds) {
    o.pass = false;
    o.detail += " (over the time budget)";
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-24s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// -- lossless and prediction ---------------------------------------------------

Outcome lossless() {
  std::mt19937_64 rng(1001);
  int bad = 0;
  std::size_t trees = 0;
  for (int i = 0; i < 200; ++i) {
    const auto f = testing::random_forest(
        rng, {.max_trees = 200, .max_depth = 25, .task = i % 2 ? Task::regression : Task::classification});
    trees += f.tree_count();
    const auto back = decompress(CompressedContainer::parse(compress(f, {.seed = static_cast<std::uint64_t>(i)}).serialize()));
    bad += !identical(back, f);
  }
  return {bad == 0, fmt("%d/200 forests differ (%zu trees)", bad, trees)};
}

Outcome prediction() {
  std::mt19937_64 rng(1002);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    const auto f = testing::random_forest(rng, {.max_trees = 60, .max_depth = 20});
    const auto c = CompressedContainer::parse(compress(f).serialize());
    for (int k = 0; k < 100; ++k) {
      const auto x = testing::random_observation(rng, f, 0.2);
      bad += !same_fit(predict_compressed(c, x), predict(f, x));
    }
  }
  return {bad == 0, fmt("%d/10000 predictions differ", bad)};
}

// -- structure -----------------------------------------------------------------

Outcome zaks() {
  const auto example = testing::tree_from_sexpr("N(N(N(N(L,L),N(L,L)),N(L,L)),N(N(N(L,L),N(L,L)),L))");
  const bool exact = zaks_encode(example).to_string() == "111100100100111001000";

  std::mt19937_64 rng(1003);
  int round_trip_bad = 0, accepted = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto tree = testing::random_shape(rng, testing::below(rng, 60));
    const auto z = zaks_encode(tree);
    const auto shape = zaks_decode(z);
    round_trip_bad += !(zaks_encode(shape) == z && shape.size() == tree.nodes.size());

    // one flipped, inserted or deleted bit, or a proper prefix
    auto s = z.to_string();
    const auto at = testing::below(rng, s.size());
    switch (i % 4) {
      case 0: s[at] = s[at] == '1' ? '0' : '1'; break;
      case 1: s.insert(s.begin() + static_cast<std::ptrdiff_t>(at), testing::below(rng, 2) ? '1' : '0'); break;
      case 2: s.erase(at, 1); break;
      case 3: s.resize(at); break;
    }
    const auto bits = Bits::from_string(s);
    bool rejected = !is_feasible(bits);
    try {
      zaks_decode(ZaksSequence(bits));
      rejected = false;
    } catch (const MalformedSequence&) {
    }
    accepted += !rejected;
  }
  return {exact && round_trip_bad == 0 && accepted == 0,
          fmt("worked example %s, %d/10000 round trips differ, %d/10000 mutants accepted", exact ? "exact" : "WRONG",
              round_trip_bad, accepted)};
}

// -- entropy coders --------------------------------------------------------------

Outcome entropy_bounds() {
  std::mt19937_64 rng(1004);
  int huffman_bad = 0;
  double worst_slack = 1;
  for (int i = 0; i < 1000; ++i) {
    const auto B = 2 + testing::below(rng, 63);
    std::vector<double> w(B);
    for (auto& x : w) x = testing::below(rng, 5) == 0 ? 0.0 : std::pow(testing::unit(rng), 3.0);
    w[testing::below(rng, B)] += 0.01;
    std::discrete_distribution<std::size_t> draw(w.begin(), w.end());
    EmpiricalDistribution d(B);
    for (int k = 0; k < 100000; ++k) d.add(draw(rng));
    const double H = entropy_bits(d);
    const double R = HuffmanTable::build(d).average_length(d);
    if (!(H <= R + 1e-12 && R < H + 1)) ++huffman_bad;
    worst_slack = std::min(worst_slack, H + 1 - R);
  }

  int arith_bad = 0;
  double worst_excess = -1e9;
  for (int i = 0; i < 1000; ++i) {
    const double p = testing::unit(rng);
    const auto n = 1 + testing::below(rng, 10000);
    std::vector<std::uint8_t> s(n);
    std::uint64_t ones = 0;
    for (auto& b : s) ones += (b = testing::unit(rng) < p ? 1 : 0);
    const double ph = static_cast<double>(ones) / static_cast<double>(n);
    const double H = ph <= 0 || ph >= 1 ? 0 : -(ph * std::log2(ph) + (1 - ph) * std::log2(1 - ph));
    const auto payload = static_cast<double>(arithmetic_payload_bits(ph, s));
    const double excess = payload - static_cast<double>(n) * H;
    worst_excess = std::max(worst_excess, excess);
    arith_bad += excess > 2;
    arith_bad += arithmetic_decode_binary(arithmetic_encode_binary(ph, s)) != s;
  }
  return {huffman_bad == 0 && arith_bad == 0,
          fmt("huffman %d/1000 outside [H, H+1) (min slack %.4f); arithmetic %d/1000 over nH+2 (worst %+.3f bits)",
              huffman_bad, worst_slack, arith_bad, worst_excess)};
}

// -- clustering ------------------------------------------------------------------

double n_entropy(const std::vector<std::uint64_t>& counts) {
  std::uint64_t n = 0;
  double s = 0;
  for (auto c : counts) {
    n += c;
    if (c) s -= static_cast<double>(c) * std::log2(static_cast<double>(c));
  }
  return n ? s + static_cast<double>(n) * std::log2(static_cast<double>(n)) : 0.0;
}

// Minimum over all set partitions. With pooled centers,
// sum_i n_i D(P_i || Q_k) = N_k H(Q_k) - sum_i n_i H(P_i).
double exhaustive_optimum(const ClusteringProblem& p) {
  const auto M = p.models.size();
  const auto B = p.models[0].alphabet();
  double base = 0;
  for (const auto& m : p.models) base += n_entropy(m.counts);
  std::vector<std::vector<std::uint64_t>> blocks;
  std::vector<double> cost;
  double best = INFINITY;
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double sum) {
    if (i == M) {
      best = std::min(best, sum - base + p.penalty() * static_cast<double>(blocks.size()));
      return;
    }
    for (std::size_t k = 0; k <= blocks.size(); ++k) {
      const bool fresh = k == blocks.size();
      if (fresh) {
        blocks.emplace_back(B, 0);
        cost.push_back(0);
      }
      const double old = cost[k];
      for (std::size_t s = 0; s < B; ++s) blocks[k][s] += p.models[i].counts[s];
      cost[k] = n_entropy(blocks[k]);
      rec(i + 1, sum - old + cost[k]);
      for (std::size_t s = 0; s < B; ++s) blocks[k][s] -= p.models[i].counts[s];
      cost[k] = old;
      if (fresh) {
        blocks.pop_back();
        cost.pop_back();
      }
    }
  };
  rec(0, 0);
  return best;
}

ClusteringProblem random_problem(std::mt19937_64& rng, std::size_t M, std::size_t B, bool distinct) {
  ClusteringProblem p;
  p.cost = {0.5 + 20 * testing::unit(rng), B};
  p.seed = rng();
  // a few latent distributions so that good clusterings exist
  const auto groups = 1 + testing::below(rng, 4);
  std::vector<std::vector<double>> latent(groups, std::vector<double>(B));
  for (auto& g : latent)
    for (auto& x : g) x = 0.05 + testing::unit(rng);
  while (p.models.size() < M) {
    const auto& g = latent[testing::below(rng, groups)];
    std::discrete_distribution<std::size_t> draw(g.begin(), g.end());
    EmpiricalDistribution d(B);
    const auto n = 1 + testing::below(rng, 60);
    for (std::size_t k = 0; k < n; ++k) d.add(draw(rng));
    // proportional counts are the same distribution
    const auto same = [&](const EmpiricalDistribution& m) {
      for (std::size_t s = 0; s < B; ++s)
        if (m.counts[s] * d.total() != d.counts[s] * m.total()) return false;
      return true;
    };
    if (distinct && std::any_of(p.models.begin(), p.models.end(), same)) continue;
    p.models.push_back(d);
  }
  return p;
}

Outcome clustering() {
  std::mt19937_64 rng(1005);
  int non_monotone = 0;
  for (int i = 0; i < 1000; ++i) {
    auto p = random_problem(rng, 2 + testing::below(rng, 40), 2 + testing::below(rng, 8), false);
    const auto r = cluster_fixed_k(p, 1 + testing::below(rng, p.models.size()));
    for (std::size_t t = 1; t < r.trace.size(); ++t)
      if (r.trace[t] > r.trace[t - 1] + 1e-12 * std::max(1.0, std::fabs(r.trace[t - 1]))) {
        ++non_monotone;
        break;
      }
  }

  int optimal = 0;
  double worst_gap = 0;
  for (int i = 0; i < 500; ++i) {
    const auto p = random_problem(rng, 2 + testing::below(rng, 11), 2 + testing::below(rng, 3), false);
    const double best = exhaustive_optimum(p);
    const double got = cluster_search(p).objective;
    const double gap = (got - best) / std::max(std::fabs(best), 1e-300);
    worst_gap = std::max(worst_gap, gap);
    optimal += gap <= 1e-9;
  }

  int closed_form_bad = 0;
  for (int i = 0; i < 200; ++i) {
    const auto p = random_problem(rng, 2 + testing::below(rng, 20), 2 + testing::below(rng, 6), true);
    const auto M = p.models.size();
    const double expect = p.penalty() * static_cast<double>(M);
    const double got = cluster_fixed_k(p, M).objective;
    closed_form_bad += std::fabs(got - expect) > 1e-9 * expect;
  }

  const bool pass = non_monotone == 0 && optimal >= 475 && closed_form_bad == 0;
  return {pass, fmt("%d/1000 traces rise; %d/500 instances optimal (worst gap %.2e); K=M closed form off in %d/200",
                    non_monotone, optimal, worst_gap, closed_form_bad)};
}

// -- compression ratio -------------------------------------------------------------

Outcome iris_ratio() {
  const auto data = testing::iris_like(1);
  const auto f = train(data, {.n_trees = 1000, .min_leaf = 5, .seed = 1});
  const auto bytes = compress(f).serialize();
  const auto light = light_baseline(f);
  const double ratio = static_cast<double>(light.bytes.size()) / static_cast<double>(bytes.size());
  const bool pass = bytes.size() <= light.bytes.size() && ratio >= 3.0;
  return {pass, fmt("container %zu B, light %zu B, ratio %.3f:1 (needs <= light and >= 3:1)", bytes.size(),
                    light.bytes.size(), ratio)};
}

// -- lossy ---------------------------------------------------------------------------

Outcome quantization() {
  const auto f = train(testing::airfoil_like(1), {.n_trees = 100, .seed = 1});
  int error_bad = 0;
  std::vector<double> fit_bytes;
  for (unsigned b = 1; b <= 16; ++b) {
    Quantizer q;
    const auto g = quantize_fits(f, {.fit_bits = b}, &q);
    error_bad += !(max_fit_error(f, g) <= q.delta / 2);
    fit_bytes.push_back(inspect(compress(g)).fits);
  }
  int drops = 0;
  for (std::size_t i = 1; i < fit_bytes.size(); ++i) drops += fit_bytes[i] < fit_bytes[i - 1];
  return {error_bad == 0 && drops == 0,
          fmt("error above delta/2 at %d/16 widths; fit bytes %.0f..%.0f, %d decreases", error_bad, fit_bytes.front(),
              fit_bytes.back(), drops)};
}

Outcome subsampling() {
  const auto data = testing::airfoil_like(2);
  const auto f = train(data, {.n_trees = 1000, .seed = 2});
  const std::vector<Observation> eval(data.rows.begin(), data.rows.begin() + 300);
  const auto full = inspect(compress(quantize_fits(f, {.fit_bits = 8})));
  const double full_payload = full.names + full.splits + full.fits;

  bool pass = true;
  std::string detail;
  for (std::size_t a0 : {10, 50, 250}) {
    const auto v = subsample_variance(f, eval, a0, 100, 3);
    const double var_ratio = v.measured / v.predicted;
    const auto [c, report] = lossy_compress(f, {.sample_size = a0, .fit_bits = 8, .seed = 4}, {});
    const auto r = inspect(c);
    const double scale = (r.names + r.splits + r.fits) / full_payload / (static_cast<double>(a0) / 1000.0);
    pass = pass && var_ratio >= 0.5 && var_ratio <= 2.0 && std::fabs(scale - 1) <= 0.2;
    detail += fmt("|A0|=%zu var x%.3f payload x%.3f; ", a0, var_ratio, scale);
  }
  return {pass, detail};
}

// -- determinism -----------------------------------------------------------------------

Outcome determinism() {
  int bad = 0;
  for (int run = 0; run < 3; ++run) {
    const TrainConfig cfg{.n_trees = 50, .seed = static_cast<std::uint64_t>(run)};
    const auto a = compress(train(testing::iris_like(3), cfg), {.seed = 9}).serialize();
    const auto b = compress(train(testing::iris_like(3), cfg), {.seed = 9}).serialize();
    bad += a != b;
  }
  std::mt19937_64 r1(1006), r2(1006);
  for (int i = 0; i < 20; ++i) {
    const auto a = compress(testing::random_forest(r1, {.max_trees = 40}), {.seed = 3}).serialize();
    const auto b = compress(testing::random_forest(r2, {.max_trees = 40}), {.seed = 3}).serialize();
    bad += a != b;
  }
  return {bad == 0, fmt("%d/23 container pairs differ", bad)};
}

}  // namespace

int main() {
  run("lossless-roundtrip", 300, lossless);
  run("prediction-equivalence", 120, prediction);
  run("zaks", 0, zaks);
  run("entropy-bounds", 0, entropy_bounds);
  run("clustering", 0, clustering);
  run("iris-compression-ratio", 600, iris_ratio);
  run("lossy-quantization", 0, quantization);
  run("lossy-subsampling", 0, subsampling);
  run("determinism", 0, determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
