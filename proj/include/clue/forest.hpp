#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clue/corpus.hpp"

namespace clue::forest {

struct ForestConfig {
  int n_trees = 100;
  int min_samples_leaf = 2;
  int max_depth = 0;  // 0 = unlimited
  int features_per_split = 5;  // ceil(14 / 3)
  bool bootstrap = true;

  void validate() const;
};

// Node array form; leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf mean label
};

struct Tree {
  std::vector<TreeNode> nodes;  // node 0 is the root

  double predict(const std::array<double, 14>& x) const;
};

struct ForestModel {
  ForestConfig config;
  uint64_t seed = 0;
  std::vector<std::string> feature_names;
  std::vector<Tree> trees;
};

// CART regression trees on bootstrap resamples, variance-reduction splits,
// midpoint thresholds. Deterministic: tree i uses seed + i.
ForestModel train_forest(const corpus::FeatureTable& table, const ForestConfig& config,
                         uint64_t seed);

// Mean of per-tree leaf values, clamped to [0, 1].
double predict_forest(const ForestModel& model, const std::array<double, 14>& features);

double forest_mse(const ForestModel& model, const corpus::FeatureTable& table);

std::string to_json(const ForestModel& model);
ForestModel from_json(const std::string& text, const std::string& origin);
void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

}  // namespace clue::forest
