#include "rfz/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rfz/errors.hpp"
#include "random.hpp"

namespace rfz {

namespace {

using detail::splitmix64;
using detail::uniform_below;
using detail::uniform_unit;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SparseModel {
  std::vector<std::uint32_t> symbols;
  std::vector<double> counts;
  double n = 0.0;
  double self_term = 0.0;  // sum c log2(c / n)
};

struct Center {
  std::vector<double> pooled;  // dense counts
  std::vector<double> log_q;   // log2 of pooled / total; -inf where zero
  double total = 0.0;
  bool live = true;
};

class Solver {
 public:
  Solver(const ClusteringProblem& problem) : problem_(problem) {
    const auto& models = problem.models;
    if (models.empty()) throw DegenerateInput("clustering needs at least one model");
    alphabet_ = models.front().alphabet();
    for (const auto& m : models) {
      if (m.alphabet() != alphabet_) throw AlphabetMismatch("models must share one alphabet");
      SparseModel s;
      for (std::uint32_t sym = 0; sym < m.alphabet(); ++sym)
        if (m.counts[sym]) {
          s.symbols.push_back(sym);
          s.counts.push_back(static_cast<double>(m.counts[sym]));
        }
      for (double c : s.counts) s.n += c;
      if (s.n == 0) throw DegenerateInput("a model has no samples");
      for (double c : s.counts) s.self_term += c * std::log2(c / s.n);
      sparse_.push_back(std::move(s));
    }
  }

  std::size_t size() const noexcept { return sparse_.size(); }

  ClusteringResult run_best(std::size_t k) const {
    if (k == 0 || k > size()) throw DegenerateInput("k must be in [1, M], got " + std::to_string(k));
    ClusteringResult best;
    bool have = false;
    const unsigned restarts = std::max(1u, problem_.restarts);
    for (unsigned r = 0; r < restarts; ++r) {
      std::mt19937_64 rng(splitmix64(problem_.seed ^ splitmix64(k * 0x100000001b3ull + r)));
      auto result = run(k, rng);
      if (!have || result.objective < best.objective) {
        best = std::move(result);
        have = true;
      }
    }
    return best;
  }

  double cost(std::size_t i, const Center& c) const {
    const auto& m = sparse_[i];
    double cross = 0.0;
    for (std::size_t j = 0; j < m.symbols.size(); ++j) {
      const double lq = c.log_q[m.symbols[j]];
      if (lq == -kInf) return kInf;
      cross += m.counts[j] * lq;
    }
    double v = m.self_term - cross;
    return v < 0 ? 0.0 : v;
  }

  Center center_from(std::span<const std::uint32_t> members) const {
    Center c;
    c.pooled.assign(alphabet_, 0.0);
    for (auto i : members) {
      const auto& m = sparse_[i];
      for (std::size_t j = 0; j < m.symbols.size(); ++j) c.pooled[m.symbols[j]] += m.counts[j];
      c.total += m.n;
    }
    finish(c);
    return c;
  }

 private:
  void finish(Center& c) const {
    c.log_q.assign(alphabet_, -kInf);
    for (std::size_t s = 0; s < alphabet_; ++s)
      if (c.pooled[s] > 0) c.log_q[s] = std::log2(c.pooled[s] / c.total);
  }

  std::vector<std::uint32_t> seed_centers(std::size_t k, std::mt19937_64& rng) const {
    const auto M = size();
    std::vector<std::uint32_t> seeds{static_cast<std::uint32_t>(uniform_below(rng, M))};
    std::vector<double> dist(M);
    auto seed_center = [&](std::uint32_t s) {
      std::uint32_t one[] = {s};
      return center_from(one);
    };
    {
      auto c = seed_center(seeds[0]);
      for (std::size_t i = 0; i < M; ++i) dist[i] = cost(i, c);
    }
    while (seeds.size() < k) {
      std::vector<std::uint32_t> unreachable;
      double total = 0.0;
      for (std::uint32_t i = 0; i < M; ++i) {
        if (dist[i] == kInf) unreachable.push_back(i);
        else total += dist[i];
      }
      std::uint32_t pick;
      if (!unreachable.empty()) {
        pick = unreachable[uniform_below(rng, unreachable.size())];
      } else if (total > 0) {
        double target = uniform_unit(rng) * total;
        pick = static_cast<std::uint32_t>(M - 1);
        for (std::uint32_t i = 0; i < M; ++i) {
          if (dist[i] <= 0) continue;
          if (target < dist[i]) {
            pick = i;
            break;
          }
          target -= dist[i];
        }
        while (dist[pick] <= 0) --pick;  // guard against rounding at the tail
      } else {
        break;  // every model coincides with a seed
      }
      seeds.push_back(pick);
      auto c = seed_center(pick);
      for (std::size_t i = 0; i < M; ++i) dist[i] = std::min(dist[i], cost(i, c));
    }
    return seeds;
  }

  // Uncovered probability mass of model i under center c.
  double uncovered(std::size_t i, const Center& c) const {
    const auto& m = sparse_[i];
    double mass = 0.0;
    for (std::size_t j = 0; j < m.symbols.size(); ++j)
      if (c.pooled[m.symbols[j]] <= 0) mass += m.counts[j];
    return mass / m.n;
  }

  ClusteringResult run(std::size_t k, std::mt19937_64& rng) const {
    const auto M = size();
    const auto seeds = seed_centers(k, rng);
    std::vector<Center> centers;
    for (auto s : seeds) {
      std::uint32_t one[] = {s};
      centers.push_back(center_from(one));
    }
    std::vector<std::uint32_t> assign(M, 0);
    std::vector<double> contrib(M, 0.0);

    // Initial assignment. A model no seed covers goes to the center missing
    // the least of its mass; the mean update then covers it.
    for (std::size_t i = 0; i < M; ++i) {
      double best = kInf;
      std::uint32_t arg = 0;
      for (std::uint32_t c = 0; c < centers.size(); ++c) {
        double v = cost(i, centers[c]);
        if (v < best) {
          best = v;
          arg = c;
        }
      }
      if (best == kInf) {
        double least = kInf;
        for (std::uint32_t c = 0; c < centers.size(); ++c) {
          double u = uncovered(i, centers[c]);
          if (u < least) {
            least = u;
            arg = c;
          }
        }
      }
      assign[i] = arg;
      contrib[i] = best;
    }
    refill_empty(centers, assign, contrib);
    update_centers(centers, assign);

    ClusteringResult out;
    out.trace.push_back(objective(centers, assign, contrib));
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < M; ++i) {
        double best = kInf;
        std::uint32_t arg = assign[i];
        for (std::uint32_t c = 0; c < centers.size(); ++c) {
          if (!centers[c].live) continue;
          double v = cost(i, centers[c]);
          if (v < best) {
            best = v;
            arg = c;
          }
        }
        if (arg != assign[i]) {
          assign[i] = arg;
          changed = true;
        }
        contrib[i] = cost(i, centers[assign[i]]);
      }
      const bool refilled = refill_empty(centers, assign, contrib);
      if (!changed && !refilled) break;
      update_centers(centers, assign);
      out.trace.push_back(objective(centers, assign, contrib));
    }
    finalize(out, centers, assign, contrib);
    return out;
  }

  // Empty live clusters take the model with the largest positive
  // contribution; if every model fits its center exactly, they are dropped.
  bool refill_empty(std::vector<Center>& centers, std::vector<std::uint32_t>& assign,
                    std::vector<double>& contrib) const {
    bool touched = false;
    for (;;) {
      std::vector<std::size_t> members(centers.size(), 0);
      for (auto a : assign) ++members[a];
      std::size_t empty = centers.size();
      for (std::size_t c = 0; c < centers.size(); ++c)
        if (centers[c].live && members[c] == 0) {
          empty = c;
          break;
        }
      if (empty == centers.size()) return touched;
      touched = true;
      std::size_t worst = assign.size();
      double worst_v = 0.0;
      for (std::size_t i = 0; i < assign.size(); ++i)
        if (contrib[i] > worst_v) {
          worst_v = contrib[i];
          worst = i;
        }
      if (worst == assign.size()) {
        centers[empty].live = false;
        continue;
      }
      std::uint32_t one[] = {static_cast<std::uint32_t>(worst)};
      centers[empty] = center_from(one);
      assign[worst] = static_cast<std::uint32_t>(empty);
      contrib[worst] = 0.0;
    }
  }

  void update_centers(std::vector<Center>& centers, const std::vector<std::uint32_t>& assign) const {
    std::vector<std::vector<std::uint32_t>> members(centers.size());
    for (std::uint32_t i = 0; i < assign.size(); ++i) members[assign[i]].push_back(i);
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (!centers[c].live) continue;
      centers[c] = center_from(members[c]);
    }
  }

  double objective(const std::vector<Center>& centers, const std::vector<std::uint32_t>& assign,
                   std::vector<double>& contrib) const {
    double div = 0.0;
    for (std::size_t i = 0; i < assign.size(); ++i) {
      contrib[i] = cost(i, centers[assign[i]]);
      div += contrib[i];
    }
    std::size_t live = 0;
    for (const auto& c : centers) live += c.live ? 1 : 0;
    return div + problem_.penalty() * static_cast<double>(live);
  }

  void finalize(ClusteringResult& out, const std::vector<Center>& centers,
                const std::vector<std::uint32_t>& assign, std::vector<double>& contrib) const {
    // Renumber clusters by first appearance in model order.
    std::vector<std::int64_t> remap(centers.size(), -1);
    std::uint32_t next = 0;
    out.assignment.resize(assign.size());
    for (std::size_t i = 0; i < assign.size(); ++i) {
      auto& r = remap[assign[i]];
      if (r < 0) r = next++;
      out.assignment[i] = static_cast<std::uint32_t>(r);
    }
    out.k = next;
    out.pooled.assign(next, EmpiricalDistribution(alphabet_));
    for (std::size_t i = 0; i < assign.size(); ++i) {
      const auto& m = problem_.models[i];
      auto& pool = out.pooled[out.assignment[i]];
      for (std::size_t s = 0; s < alphabet_; ++s) pool.counts[s] += m.counts[s];
    }
    for (const auto& p : out.pooled) out.centers.push_back(p.probabilities());
    out.divergence = 0.0;
    for (std::size_t i = 0; i < assign.size(); ++i) {
      contrib[i] = cost(i, centers[assign[i]]);
      out.divergence += contrib[i];
    }
    out.objective = out.divergence + problem_.penalty() * static_cast<double>(out.k);
  }

  const ClusteringProblem& problem_;
  std::size_t alphabet_ = 0;
  std::vector<SparseModel> sparse_;
};

}  // namespace

ClusteringResult cluster_fixed_k(const ClusteringProblem& problem, std::size_t k) {
  Solver solver(problem);
  return solver.run_best(k);
}

ClusteringResult cluster_search(const ClusteringProblem& problem) {
  Solver solver(problem);
  const auto k_max = std::min(std::max<std::size_t>(problem.k_max, 1), solver.size());
  ClusteringResult best = solver.run_best(1);
  for (std::size_t k = 2; k <= k_max; ++k) {
    if (problem.penalty() * static_cast<double>(k) >= best.objective) break;
    auto r = solver.run_best(k);
    if (r.objective < best.objective) best = std::move(r);
  }
  return best;
}

std::vector<double> center_of(std::span<const EmpiricalDistribution> members) {
  if (members.empty()) throw DegenerateInput("center of an empty set");
  EmpiricalDistribution pooled(members.front().alphabet());
  for (const auto& m : members) {
    if (m.alphabet() != pooled.alphabet()) throw AlphabetMismatch("members must share one alphabet");
    for (std::size_t s = 0; s < m.alphabet(); ++s) pooled.counts[s] += m.counts[s];
  }
  return pooled.probabilities();
}

double clustering_objective(const ClusteringProblem& problem, std::span<const std::uint32_t> assignment) {
  Solver solver(problem);
  if (assignment.size() != solver.size()) throw DegenerateInput("assignment size does not match models");
  std::uint32_t k = 0;
  for (auto a : assignment) k = std::max(k, a + 1);
  std::vector<std::vector<std::uint32_t>> members(k);
  for (std::uint32_t i = 0; i < assignment.size(); ++i) members[assignment[i]].push_back(i);
  double total = 0.0;
  std::size_t used = 0;
  for (const auto& group : members) {
    if (group.empty()) continue;
    ++used;
    auto c = solver.center_from(group);
    for (auto i : group) total += solver.cost(i, c);
  }
  return total + problem.penalty() * static_cast<double>(used);
}

}  // namespace rfz
