#include "rfz/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rfz/errors.hpp"

namespace rfz {

std::uint64_t EmpiricalDistribution::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::size_t EmpiricalDistribution::support_size() const noexcept {
  return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
}

std::vector<double> EmpiricalDistribution::probabilities() const {
  const auto n = total();
  std::vector<double> p(counts.size(), 0.0);
  if (n == 0) return p;
  for (std::size_t s = 0; s < counts.size(); ++s)
    p[s] = static_cast<double>(counts[s]) / static_cast<double>(n);
  return p;
}

double entropy_bits(std::span<const double> p) noexcept {
  double h = 0.0;
  for (double x : p)
    if (x > 0) h -= x * std::log2(x);
  return h;
}

double entropy_bits(const EmpiricalDistribution& p) {
  auto probs = p.probabilities();
  return entropy_bits(probs);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw AlphabetMismatch("alphabet sizes differ: " + std::to_string(p.size()) + " vs " +
                           std::to_string(q.size()));
  double d = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s] <= 0) continue;
    if (q[s] <= 0) return std::numeric_limits<double>::infinity();
    d += p[s] * std::log2(p[s] / q[s]);
  }
  return d < 0 ? 0.0 : d;  // rounding can leave -1e-17 for p == q
}

double kl_divergence(const EmpiricalDistribution& p, std::span<const double> q) {
  auto probs = p.probabilities();
  return kl_divergence(probs, q);
}

DictionaryCost dictionary_cost(DictionaryKind kind, const DictionaryFacts& facts) {
  auto lg = [](double x) { return x > 1 ? std::log2(x) : 0.0; };
  DictionaryCost cost;
  switch (kind) {
    case DictionaryKind::names:
      cost.alphabet = facts.variables;
      cost.alpha = lg(static_cast<double>(facts.variables)) + static_cast<double>(facts.variables);
      break;
    case DictionaryKind::categorical_split:
    case DictionaryKind::fits:
      cost.alphabet = facts.distinct_values;
      cost.alpha = lg(static_cast<double>(facts.distinct_values)) + static_cast<double>(facts.distinct_values);
      break;
    case DictionaryKind::numerical_split: {
      // A container built without n_obs still needs log2(n) >= log2(C).
      auto n = std::max<std::uint64_t>(facts.observations, facts.distinct_values);
      cost.alphabet = facts.distinct_values;
      cost.alpha = lg(static_cast<double>(n)) + static_cast<double>(facts.distinct_values);
      break;
    }
  }
  return cost;
}

}  // namespace rfz
