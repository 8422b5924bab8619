#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rfz {

/// Symbol counts over the alphabet {0, ..., B-1}.
struct EmpiricalDistribution {
  std::vector<std::uint64_t> counts;

  EmpiricalDistribution() = default;
  explicit EmpiricalDistribution(std::size_t alphabet) : counts(alphabet, 0) {}
  explicit EmpiricalDistribution(std::vector<std::uint64_t> c) : counts(std::move(c)) {}

  std::size_t alphabet() const noexcept { return counts.size(); }
  std::uint64_t total() const noexcept;
  std::size_t support_size() const noexcept;
  void add(std::size_t symbol, std::uint64_t n = 1) { counts.at(symbol) += n; }
  std::vector<double> probabilities() const;

  bool operator==(const EmpiricalDistribution&) const = default;
};

/// Shannon entropy in bits of a probability vector (0 log 0 = 0).
double entropy_bits(std::span<const double> p) noexcept;
double entropy_bits(const EmpiricalDistribution& p);

/// D(P||Q) in bits: 0 log(0/q) = 0 and p log(p/0) = +inf.
/// Throws AlphabetMismatch if the alphabets differ.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_divergence(const EmpiricalDistribution& p, std::span<const double> q);

enum class DictionaryKind { names, categorical_split, numerical_split, fits };

/// Bits charged per dictionary line (alpha) and the alphabet it applies to.
struct DictionaryCost {
  double alpha = 0.0;
  std::size_t alphabet = 0;
  double total() const noexcept { return alpha * static_cast<double>(alphabet); }
};

/// Schema facts the per-line cost depends on.
struct DictionaryFacts {
  std::size_t variables = 0;        // d, for names
  std::size_t distinct_values = 0;  // C: distinct split values of a variable, or distinct fits
  std::uint64_t observations = 0;   // n, for numerical splits
};

/// names: log2(d) + d; categorical splits and fits: log2(C) + C;
/// numerical splits: log2(max(n, C)) + C. The alphabet is d for names and C otherwise.
DictionaryCost dictionary_cost(DictionaryKind kind, const DictionaryFacts& facts);

}  // namespace rfz
