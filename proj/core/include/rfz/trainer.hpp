#pragma once

#include <cstdint>

#include "rfz/dataset.hpp"
#include "rfz/forest.hpp"

namespace rfz {

struct TrainConfig {
  std::size_t n_trees = 100;
  std::size_t mtry = 0;      // 0: sqrt(d) for classification, d/3 for regression
  std::size_t min_leaf = 5;  // in-bag observations (with multiplicity) per child
  std::size_t max_depth = 0; // 0: unlimited
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

/// CART forest: Gini for classification, squared error for regression.
/// Every node stores the fit of its in-bag observations. Throws DataError on
/// empty data, missing values or non-finite targets, UsageError on a bad config.
Forest train(const Dataset& data, const TrainConfig& cfg);

/// Tree `tree_id` of train(data, cfg), built on its own.
Tree train_tree(const Dataset& data, const TrainConfig& cfg, std::uint64_t tree_id);

}  // namespace rfz
