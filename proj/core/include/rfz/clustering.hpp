#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rfz/entropy.hpp"

namespace rfz {

/// Groups M empirical distributions over a shared alphabet into codebooks,
/// minimizing
///
///   sum_k sum_{i in C_k} n_i * D(P_i || Q_k)  +  alpha * B * K
///
/// where Q_k is the count-weighted mean of cluster k (the minimizer of the
/// first term for a fixed assignment).
struct ClusteringProblem {
  std::vector<EmpiricalDistribution> models;
  DictionaryCost cost;  // alpha per line, B lines per codebook
  std::size_t k_max = 32;
  std::uint64_t seed = 0;
  unsigned restarts = 8;

  double penalty() const noexcept { return cost.total(); }
};

struct ClusteringResult {
  std::size_t k = 0;                        // non-empty clusters
  std::vector<std::uint32_t> assignment;    // model -> cluster in [0, k)
  std::vector<EmpiricalDistribution> pooled;  // summed member counts per cluster
  std::vector<std::vector<double>> centers;   // pooled / total
  double divergence = 0.0;                  // sum of n_i * D(P_i || Q_k), bits
  double objective = 0.0;                   // divergence + penalty * k
  std::vector<double> trace;                // per-iteration objective of the chosen run
};

/// Lloyd-style alternation from k-means++ seedings (distance n_i * D), best of
/// `restarts`. Clusters that end up empty are refilled with the worst-fitting
/// model, or dropped if every model already fits perfectly, so the result may
/// have fewer than k clusters when models coincide.
/// Throws DegenerateInput if there are no models or k is out of range, and
/// AlphabetMismatch if the models' alphabets differ.
ClusteringResult cluster_fixed_k(const ClusteringProblem& problem, std::size_t k);

/// Runs k = 1 .. min(k_max, M) and keeps the lowest objective (ties to the
/// smaller k). Stops early once penalty * k alone exceeds the best objective.
ClusteringResult cluster_search(const ClusteringProblem& problem);

/// Count-weighted mean of the members' distributions.
std::vector<double> center_of(std::span<const EmpiricalDistribution> members);

/// Objective of a given assignment with optimal (weighted-mean) centers.
double clustering_objective(const ClusteringProblem& problem, std::span<const std::uint32_t> assignment);

}  // namespace rfz
