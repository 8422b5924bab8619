#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfz/container.hpp"
#include "rfz/dataset.hpp"
#include "rfz/forest.hpp"

namespace rfz {

enum class SigmaMode { mean, max };

/// Per-tree deviations e_t(i) = yhat_{t,i} - yhat*_i from the full-forest
/// prediction over an evaluation set.
struct ErrorStats {
  std::vector<double> tree_mean_error;  // e_t, mean over observations
  std::vector<double> obs_variance;     // sigma^2_i, population variance over trees
  double mu = 0;                        // mean of e_t
  double sigma2 = 0;                    // mean (or max) of sigma^2_i
};

/// Throws TaskError for classification forests, DataError for an empty set.
ErrorStats estimate_error_stats(const Forest& forest, std::span<const Observation> eval,
                                SigmaMode mode = SigmaMode::mean);

struct LossyPlan {
  std::size_t sample_size = 0;                            // |A0|; 0 keeps every tree
  std::optional<unsigned> fit_bits;                       // b in [1, 64]; none leaves fits exact
  std::optional<std::pair<double, double>> fit_range;     // default [min fit, max fit]
  std::uint64_t seed = 0;
};

/// Uniform sample of `sample_size` trees without replacement, kept in their
/// original order. A sample of every tree returns the forest unchanged.
Forest subsample_trees(const Forest& forest, const LossyPlan& plan);

struct Quantizer {
  double lo = 0, hi = 0;
  unsigned bits = 0;
  long double delta = 0;  // (hi - lo) / 2^bits

  /// Cell index of v, the top edge folded into the last cell.
  std::uint64_t cell(double v) const;
  long double midpoint(std::uint64_t cell) const;
};

/// Maps every fit v to the reconstruction level of its cell. Levels start at
/// the cell midpoint and are nudged to the nearest double within delta/2 of
/// every fit in the cell. Throws TaskError for classification, RangeError if
/// a fit lies outside [lo, hi] or the range is invalid, UsageError for b
/// outside [1, 64].
Forest quantize_fits(const Forest& forest, const LossyPlan& plan, Quantizer* used = nullptr);

/// Largest |v - q(v)| over matching nodes of two forests with equal shapes.
long double max_fit_error(const Forest& original, const Forest& quantized);

struct LossyReport {
  std::size_t trees_before = 0;
  std::size_t trees_after = 0;
  std::optional<unsigned> fit_bits;
  double range_lo = 0, range_hi = 0;
  double delta = 0;
  double max_quantization_error = 0;

  std::optional<double> sigma2;
  std::optional<double> predicted_subsampling_loss;  // sigma2/|A0| + sigma2/|A|
  std::optional<double> combined_bound;               // sigma2/|A0| + delta^2/(12 |A0|)

  std::string metric;  // "mse" or "error_rate"
  std::optional<double> test_before;
  std::optional<double> test_after;

  std::uint64_t size_before = 0;
  std::uint64_t size_after = 0;
  double fit_bytes_before = 0;
  double fit_bytes_after = 0;

  std::string to_json() const;
};

/// Subsample, quantize, compress. The evaluation set (when given, with
/// targets) fills the error statistics and test metrics.
std::pair<CompressedContainer, LossyReport> lossy_compress(const Forest& forest, const LossyPlan& plan,
                                                           const CompressOptions& opts,
                                                           const Dataset* eval = nullptr,
                                                           SigmaMode mode = SigmaMode::mean);

/// Test MSE (regression) or error rate (classification) of a forest.
double test_metric(const Forest& forest, const Dataset& data);

/// Monte-Carlo check of the subsampling variance: over `trials` seeded
/// samples of |A0| trees, the mean squared deviation of the subsample
/// prediction from the full prediction, averaged over observations.
struct SubsampleVariance {
  double measured = 0;
  double predicted = 0;  // sigma2 * (1/|A0| - 1/|A|)
};
SubsampleVariance subsample_variance(const Forest& forest, std::span<const Observation> eval,
                                     std::size_t sample_size, std::size_t trials, std::uint64_t seed);

struct SweepRow {
  double parameter = 0;  // b or |A0|
  std::optional<double> metric;
  std::uint64_t size = 0;
  double fit_bytes = 0;
};

std::vector<SweepRow> sweep_fit_bits(const Forest& forest, std::span<const unsigned> bits, const LossyPlan& base,
                                     const CompressOptions& opts, const Dataset* eval = nullptr);
std::vector<SweepRow> sweep_sample_sizes(const Forest& forest, std::span<const std::size_t> sizes,
                                         const LossyPlan& base, const CompressOptions& opts,
                                         const Dataset* eval = nullptr);
std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view parameter_name);

}  // namespace rfz
