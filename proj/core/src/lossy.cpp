#include "rfz/lossy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "random.hpp"
#include "rfz/errors.hpp"

namespace rfz {

namespace {

std::vector<std::uint32_t> sample_indices(std::size_t population, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint32_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0u);
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + detail::uniform_below(rng, population - i)]);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::size_t resolve_sample_size(const Forest& forest, const LossyPlan& plan) {
  const auto a = forest.tree_count();
  const auto n = plan.sample_size == 0 ? a : plan.sample_size;
  if (n > a) throw UsageError("cannot sample " + std::to_string(n) + " of " + std::to_string(a) + " trees");
  if (n == 0) throw UsageError("the forest has no trees to sample");
  return n;
}

// Per-tree regression predictions, [tree][observation].
std::vector<std::vector<double>> tree_predictions(const Forest& forest, std::span<const Observation> eval) {
  std::vector<std::vector<double>> p(forest.tree_count(), std::vector<double>(eval.size()));
  for (std::size_t i = 0; i < eval.size(); ++i) {
    check_observation(forest.schema, eval[i]);
    for (std::size_t t = 0; t < forest.tree_count(); ++t) {
      const auto& tree = forest.trees[t];
      p[t][i] = std::get<double>(tree.nodes[route(tree, eval[i])].fit);
    }
  }
  return p;
}

std::vector<double> full_predictions(const std::vector<std::vector<double>>& p, std::size_t n_obs) {
  std::vector<double> full(n_obs, 0.0);
  for (std::size_t i = 0; i < n_obs; ++i) {
    double s = 0;
    for (const auto& row : p) s += row[i];
    full[i] = s / static_cast<double>(p.size());
  }
  return full;
}

void require_regression(const Forest& forest, const char* what) {
  if (forest.task != Task::regression) throw TaskError(std::string(what) + " needs a regression forest");
}

}  // namespace

ErrorStats estimate_error_stats(const Forest& forest, std::span<const Observation> eval, SigmaMode mode) {
  require_regression(forest, "error statistics");
  if (eval.empty()) throw DataError("evaluation set is empty");
  if (forest.trees.empty()) throw DataError("forest has no trees");
  const auto p = tree_predictions(forest, eval);
  const auto full = full_predictions(p, eval.size());
  const auto T = forest.tree_count();
  const auto n = eval.size();

  ErrorStats s;
  s.tree_mean_error.assign(T, 0.0);
  s.obs_variance.assign(n, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += p[t][i] - full[i];
    s.tree_mean_error[t] = sum / static_cast<double>(n);
  }
  s.mu = std::accumulate(s.tree_mean_error.begin(), s.tree_mean_error.end(), 0.0) / static_cast<double>(T);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0;
    for (std::size_t t = 0; t < T; ++t) mean += p[t][i] - full[i];
    mean /= static_cast<double>(T);
    double var = 0;
    for (std::size_t t = 0; t < T; ++t) {
      const double e = p[t][i] - full[i] - mean;
      var += e * e;
    }
    s.obs_variance[i] = var / static_cast<double>(T);
  }
  if (mode == SigmaMode::max)
    s.sigma2 = *std::max_element(s.obs_variance.begin(), s.obs_variance.end());
  else
    s.sigma2 = std::accumulate(s.obs_variance.begin(), s.obs_variance.end(), 0.0) / static_cast<double>(n);
  return s;
}

Forest subsample_trees(const Forest& forest, const LossyPlan& plan) {
  const auto n = resolve_sample_size(forest, plan);
  if (n == forest.tree_count()) return forest;
  std::mt19937_64 rng(detail::mix_seed(plan.seed, 0x5A3B1E));
  Forest out;
  out.schema = forest.schema;
  out.task = forest.task;
  out.class_labels = forest.class_labels;
  for (auto t : sample_indices(forest.tree_count(), n, rng)) out.trees.push_back(forest.trees[t]);
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t Quantizer::cell(double v) const {
  const long double k = std::floor((static_cast<long double>(v) - lo) / delta);
  const long double last = std::ldexp(1.0L, static_cast<int>(bits)) - 1;
  if (k <= 0) return 0;
  if (k >= last) return static_cast<std::uint64_t>(last);
  return static_cast<std::uint64_t>(k);
}

long double Quantizer::midpoint(std::uint64_t cell) const {
  return static_cast<long double>(lo) + (static_cast<long double>(cell) + 0.5L) * delta;
}

Forest quantize_fits(const Forest& forest, const LossyPlan& plan, Quantizer* used) {
  require_regression(forest, "fit quantization");
  if (!plan.fit_bits) return forest;
  const unsigned b = *plan.fit_bits;
  if (b < 1 || b > 64) throw UsageError("fit bits must be in [1, 64], got " + std::to_string(b));

  double lo, hi;
  if (plan.fit_range) {
    std::tie(lo, hi) = *plan.fit_range;
  } else {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (const auto& tree : forest.trees)
      for (const auto& n : tree.nodes) {
        const double v = std::get<double>(n.fit);
        if (std::isnan(v)) throw RangeError("NaN fit cannot be quantized");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    if (forest.trees.empty()) return forest;
  }
  if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo)
    throw RangeError("invalid quantization range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  for (const auto& tree : forest.trees)
    for (const auto& n : tree.nodes) {
      const double v = std::get<double>(n.fit);
      if (!(v >= lo && v <= hi)) throw RangeError("fit " + std::to_string(v) + " outside the quantization range");
    }

  Quantizer q{lo, hi, b, std::ldexp(static_cast<long double>(hi) - lo, -static_cast<int>(b))};
  if (used) *used = q;
  if (hi == lo) return forest;

  // Feasible interval per occupied cell: within delta/2 of its extreme fits.
  std::map<std::uint64_t, std::pair<double, double>> extremes;
  for (const auto& tree : forest.trees)
    for (const auto& n : tree.nodes) {
      const double v = std::get<double>(n.fit);
      auto [it, inserted] = extremes.try_emplace(q.cell(v), v, v);
      if (!inserted) {
        it->second.first = std::min(it->second.first, v);
        it->second.second = std::max(it->second.second, v);
      }
    }
  const long double half = q.delta / 2;
  std::map<std::uint64_t, double> level;
  for (const auto& [cell, mm] : extremes) {
    const long double lower = mm.second - half;
    const long double upper = mm.first + half;
    double l = static_cast<double>(q.midpoint(cell));
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (l < lower) {
      l = static_cast<double>(lower);
      if (l < lower) l = std::nextafter(l, inf);
    } else if (l > upper) {
      l = static_cast<double>(upper);
      if (l > upper) l = std::nextafter(l, -inf);
    }
    level[cell] = l;
  }

  Forest out = forest;
  for (auto& tree : out.trees)
    for (auto& n : tree.nodes) n.fit = level.at(q.cell(std::get<double>(n.fit)));
  return out;
}

long double max_fit_error(const Forest& original, const Forest& quantized) {
  long double worst = 0;
  for (std::size_t t = 0; t < original.trees.size(); ++t)
    for (std::size_t i = 0; i < original.trees[t].nodes.size(); ++i) {
      const auto a = static_cast<long double>(std::get<double>(original.trees[t].nodes[i].fit));
      const auto b = static_cast<long double>(std::get<double>(quantized.trees.at(t).nodes.at(i).fit));
      worst = std::max(worst, std::fabs(a - b));
    }
  return worst;
}

// ---------------------------------------------------------------------------

double test_metric(const Forest& forest, const Dataset& data) {
  if (data.targets.size() != data.rows.size() || data.rows.empty())
    throw DataError("evaluation set needs one target per row");
  double acc = 0;
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const auto fit = predict(forest, data.rows[i]);
    if (forest.task == Task::regression) {
      const double e = std::get<double>(fit) - data.targets[i];
      acc += e * e;
    } else {
      acc += std::get<ClassLabel>(fit).index == static_cast<std::uint32_t>(data.targets[i]) ? 0.0 : 1.0;
    }
  }
  return acc / static_cast<double>(data.rows.size());
}

std::string LossyReport::to_json() const {
  nlohmann::ordered_json j;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  j["trees_before"] = trees_before;
  j["trees_after"] = trees_after;
  j["fit_bits"] = fit_bits ? nlohmann::ordered_json(*fit_bits) : nlohmann::ordered_json();
  j["fit_range"] = {range_lo, range_hi};
  j["delta"] = delta;
  j["max_quantization_error"] = max_quantization_error;
  j["sigma2"] = opt(sigma2);
  j["predicted_subsampling_loss"] = opt(predicted_subsampling_loss);
  j["combined_bound"] = opt(combined_bound);
  j["metric"] = metric;
  j["test_before"] = opt(test_before);
  j["test_after"] = opt(test_after);
  j["size_before"] = size_before;
  j["size_after"] = size_after;
  j["fit_bytes_before"] = fit_bytes_before;
  j["fit_bytes_after"] = fit_bytes_after;
  return j.dump(2);
}

namespace {

Forest lossy_forest(const Forest& forest, const LossyPlan& plan, Quantizer* q) {
  if (plan.fit_bits && forest.task != Task::regression)
    throw TaskError("classification fits are already categorical and cannot be quantized");
  Forest sub = subsample_trees(forest, plan);
  if (plan.fit_bits) {
    // the range is taken over the full forest so subsampling does not move the grid
    LossyPlan p = plan;
    if (!p.fit_range) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& tree : forest.trees)
        for (const auto& n : tree.nodes) {
          lo = std::min(lo, std::get<double>(n.fit));
          hi = std::max(hi, std::get<double>(n.fit));
        }
      if (!forest.trees.empty()) p.fit_range = {lo, hi};
    }
    return quantize_fits(sub, p, q);
  }
  return sub;
}

}  // namespace

std::pair<CompressedContainer, LossyReport> lossy_compress(const Forest& forest, const LossyPlan& plan,
                                                           const CompressOptions& opts, const Dataset* eval,
                                                           SigmaMode mode) {
  const auto n = resolve_sample_size(forest, plan);
  Quantizer q;
  const Forest lossy = lossy_forest(forest, plan, &q);
  auto container = compress(lossy, opts);

  LossyReport r;
  r.trees_before = forest.tree_count();
  r.trees_after = n;
  r.fit_bits = plan.fit_bits;
  if (plan.fit_bits) {
    r.range_lo = q.lo;
    r.range_hi = q.hi;
    r.delta = static_cast<double>(q.delta);
    r.max_quantization_error = static_cast<double>(max_fit_error(subsample_trees(forest, plan), lossy));
  }
  const auto before = inspect(compress(forest, opts));
  const auto after = inspect(container);
  r.size_before = before.total;
  r.size_after = after.total;
  r.fit_bytes_before = before.fits;
  r.fit_bytes_after = after.fits;

  r.metric = forest.task == Task::regression ? "mse" : "error_rate";
  if (eval) {
    if (forest.task == Task::regression) {
      const auto stats = estimate_error_stats(forest, eval->rows, mode);
      const double a0 = static_cast<double>(n), a = static_cast<double>(forest.tree_count());
      r.sigma2 = stats.sigma2;
      r.predicted_subsampling_loss = stats.sigma2 / a0 + stats.sigma2 / a;
      r.combined_bound = stats.sigma2 / a0 + r.delta * r.delta / (12.0 * a0);
    }
    if (!eval->targets.empty()) {
      r.test_before = test_metric(forest, *eval);
      r.test_after = test_metric(lossy, *eval);
    }
  }
  return {std::move(container), r};
}

SubsampleVariance subsample_variance(const Forest& forest, std::span<const Observation> eval, std::size_t sample_size,
                                     std::size_t trials, std::uint64_t seed) {
  require_regression(forest, "subsampling variance");
  if (eval.empty() || trials == 0) throw DataError("need observations and at least one trial");
  const auto T = forest.tree_count();
  if (sample_size == 0 || sample_size > T) throw UsageError("sample size out of range");
  const auto p = tree_predictions(forest, eval);
  const auto full = full_predictions(p, eval.size());
  const auto stats = estimate_error_stats(forest, eval);

  double acc = 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(detail::mix_seed(seed, trial));
    const auto idx = sample_indices(T, sample_size, rng);
    for (std::size_t i = 0; i < eval.size(); ++i) {
      double s = 0;
      for (auto t : idx) s += p[t][i];
      const double dev = s / static_cast<double>(sample_size) - full[i];
      acc += dev * dev;
    }
  }
  SubsampleVariance v;
  v.measured = acc / static_cast<double>(trials * eval.size());
  v.predicted = stats.sigma2 * (1.0 / static_cast<double>(sample_size) - 1.0 / static_cast<double>(T));
  return v;
}

std::vector<SweepRow> sweep_fit_bits(const Forest& forest, std::span<const unsigned> bits, const LossyPlan& base,
                                     const CompressOptions& opts, const Dataset* eval) {
  std::vector<SweepRow> rows;
  for (auto b : bits) {
    LossyPlan plan = base;
    plan.fit_bits = b;
    const auto f = lossy_forest(forest, plan, nullptr);
    const auto report = inspect(compress(f, opts));
    SweepRow row{static_cast<double>(b), std::nullopt, report.total, report.fits};
    if (eval && !eval->targets.empty()) row.metric = test_metric(f, *eval);
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> sweep_sample_sizes(const Forest& forest, std::span<const std::size_t> sizes,
                                         const LossyPlan& base, const CompressOptions& opts, const Dataset* eval) {
  std::vector<SweepRow> rows;
  for (auto n : sizes) {
    LossyPlan plan = base;
    plan.sample_size = n;
    const auto f = lossy_forest(forest, plan, nullptr);
    const auto report = inspect(compress(f, opts));
    SweepRow row{static_cast<double>(n), std::nullopt, report.total, report.fits};
    if (eval && !eval->targets.empty()) row.metric = test_metric(f, *eval);
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view parameter_name) {
  std::ostringstream os;
  os.precision(17);
  os << parameter_name << ",metric,size_bytes,fit_bytes\n";
  for (const auto& r : rows) {
    os << r.parameter << ',';
    if (r.metric) os << *r.metric;
    os << ',' << r.size << ',' << r.fit_bytes << '\n';
  }
  return os.str();
}

}  // namespace rfz
