#include "clue/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "clue/errors.hpp"
#include "clue/io.hpp"
#include "clue/rng.hpp"

using nlohmann::json;
using nlohmann::ordered_json;

namespace clue::forest {

void ForestConfig::validate() const {
  if (n_trees < 1) throw_numeric("n_trees must be >= 1");
  if (min_samples_leaf < 1) throw_numeric("min_samples_leaf must be >= 1");
  if (max_depth < 0) throw_numeric("max_depth must be >= 0");
  if (features_per_split < 1 || features_per_split > 14)
    throw_numeric("features_per_split must be in [1, 14]");
}

double Tree::predict(const std::array<double, 14>& x) const {
  int idx = 0;
  while (nodes[static_cast<size_t>(idx)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<size_t>(idx)];
    idx = x[static_cast<size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<size_t>(idx)].value;
}

namespace {

struct SplitResult {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

double mean_label(const corpus::FeatureTable& t, const std::vector<size_t>& rows) {
  double acc = 0.0;
  for (size_t r : rows) acc += t.labels[r];
  return acc / static_cast<double>(rows.size());
}

// Best variance-reduction split over the candidate features, threshold at
// midpoints of consecutive distinct values. Ties go to the lowest feature
// index, then the lowest threshold, so trees serialize identically across
// runs.
SplitResult best_split(const corpus::FeatureTable& t, const std::vector<size_t>& rows,
                       const std::vector<int>& features, int min_samples_leaf) {
  SplitResult best;
  size_t n = rows.size();

  double total_sum = 0.0, total_sq = 0.0;
  for (size_t r : rows) {
    total_sum += t.labels[r];
    total_sq += t.labels[r] * t.labels[r];
  }
  double parent_sse = total_sq - total_sum * total_sum / static_cast<double>(n);

  std::vector<std::pair<double, double>> vals(n);  // (feature value, label)
  for (int f : features) {
    for (size_t i = 0; i < n; ++i)
      vals[i] = {t.features[rows[i]][static_cast<size_t>(f)], t.labels[rows[i]]};
    std::sort(vals.begin(), vals.end());

    double left_sum = 0.0, left_sq = 0.0;
    for (size_t i = 0; i + 1 < n; ++i) {
      left_sum += vals[i].second;
      left_sq += vals[i].second * vals[i].second;
      if (vals[i].first == vals[i + 1].first) continue;
      size_t n_left = i + 1, n_right = n - n_left;
      if (n_left < static_cast<size_t>(min_samples_leaf) ||
          n_right < static_cast<size_t>(min_samples_leaf))
        continue;
      double right_sum = total_sum - left_sum;
      double right_sq = total_sq - left_sq;
      double sse = (left_sq - left_sum * left_sum / static_cast<double>(n_left)) +
                   (right_sq - right_sum * right_sum / static_cast<double>(n_right));
      double gain = parent_sse - sse;
      double threshold = 0.5 * (vals[i].first + vals[i + 1].first);
      // strict > keeps the first candidate on exact ties; features and
      // thresholds are visited in ascending order
      constexpr double kMinGain = 1e-15;
      if (gain > kMinGain && gain > best.gain) {
        best.found = true;
        best.feature = f;
        best.threshold = threshold;
        best.gain = gain;
      }
    }
  }
  return best;
}

int grow(const corpus::FeatureTable& t, std::vector<size_t> rows, const ForestConfig& cfg,
         Rng& rng, int depth, std::vector<TreeNode>& nodes) {
  int idx = static_cast<int>(nodes.size());
  nodes.emplace_back();
  nodes.back().value = mean_label(t, rows);

  if (rows.size() < 2 * static_cast<size_t>(cfg.min_samples_leaf)) return idx;
  if (cfg.max_depth > 0 && depth >= cfg.max_depth) return idx;

  bool constant = true;
  for (size_t r : rows)
    if (t.labels[r] != t.labels[rows[0]]) {
      constant = false;
      break;
    }
  if (constant) return idx;

  // sample candidate features without replacement, then sort for the
  // tie-break order
  std::vector<int> all(14);
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> candidates;
  for (int k = 0; k < cfg.features_per_split; ++k) {
    size_t j = static_cast<size_t>(k) + rng.next_index(14 - static_cast<uint64_t>(k));
    std::swap(all[static_cast<size_t>(k)], all[j]);
    candidates.push_back(all[static_cast<size_t>(k)]);
  }
  std::sort(candidates.begin(), candidates.end());

  SplitResult split = best_split(t, rows, candidates, cfg.min_samples_leaf);
  if (!split.found) return idx;

  std::vector<size_t> left_rows, right_rows;
  for (size_t r : rows) {
    if (t.features[r][static_cast<size_t>(split.feature)] <= split.threshold)
      left_rows.push_back(r);
    else
      right_rows.push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();

  int left = grow(t, std::move(left_rows), cfg, rng, depth + 1, nodes);
  int right = grow(t, std::move(right_rows), cfg, rng, depth + 1, nodes);
  nodes[static_cast<size_t>(idx)].feature = split.feature;
  nodes[static_cast<size_t>(idx)].threshold = split.threshold;
  nodes[static_cast<size_t>(idx)].left = left;
  nodes[static_cast<size_t>(idx)].right = right;
  return idx;
}

}  // namespace

ForestModel train_forest(const corpus::FeatureTable& table, const ForestConfig& config,
                         uint64_t seed) {
  config.validate();
  if (table.size() == 0) throw_schema("cannot train a forest on an empty table");
  if (table.size() < 2) throw_schema("cannot train a forest on a single-row table");
  for (double y : table.labels)
    if (y < 0.0 || y > 1.0) throw_schema("forest labels must lie in [0, 1]");

  ForestModel model;
  model.config = config;
  model.seed = seed;
  model.feature_names.assign(corpus::kFeatureNames.begin(), corpus::kFeatureNames.end());
  model.trees.resize(static_cast<size_t>(config.n_trees));

  size_t n = table.size();
  for (int i = 0; i < config.n_trees; ++i) {
    Rng rng(seed + static_cast<uint64_t>(i));
    std::vector<size_t> rows;
    rows.reserve(n);
    if (config.bootstrap) {
      for (size_t k = 0; k < n; ++k) rows.push_back(static_cast<size_t>(rng.next_index(n)));
    } else {
      for (size_t k = 0; k < n; ++k) rows.push_back(k);
    }
    grow(table, std::move(rows), config, rng, 0, model.trees[static_cast<size_t>(i)].nodes);
  }
  return model;
}

double predict_forest(const ForestModel& model, const std::array<double, 14>& features) {
  double acc = 0.0;
  for (const Tree& t : model.trees) acc += t.predict(features);
  double y = acc / static_cast<double>(model.trees.size());
  return std::clamp(y, 0.0, 1.0);
}

double forest_mse(const ForestModel& model, const corpus::FeatureTable& table) {
  if (table.size() == 0) throw_schema("cannot compute MSE on an empty table");
  double acc = 0.0;
  for (size_t r = 0; r < table.size(); ++r) {
    double d = predict_forest(model, table.features[r]) - table.labels[r];
    acc += d * d;
  }
  return acc / static_cast<double>(table.size());
}

namespace {
constexpr int kForestFormatVersion = 1;
}

std::string to_json(const ForestModel& model) {
  ordered_json doc;
  doc["format_version"] = kForestFormatVersion;
  doc["config"] = {{"n_trees", model.config.n_trees},
                   {"min_samples_leaf", model.config.min_samples_leaf},
                   {"max_depth", model.config.max_depth},
                   {"features_per_split", model.config.features_per_split},
                   {"bootstrap", model.config.bootstrap}};
  doc["seed"] = model.seed;
  doc["feature_names"] = model.feature_names;
  ordered_json trees = ordered_json::array();
  for (const Tree& t : model.trees) {
    ordered_json nodes = ordered_json::array();
    for (const TreeNode& n : t.nodes)
      nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left},
                       {"r", n.right}, {"v", n.value}});
    trees.push_back(std::move(nodes));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(2) + "\n";
}

ForestModel from_json(const std::string& text, const std::string& origin) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw_schema(origin + ": invalid JSON");
  if (!doc.contains("format_version") || doc["format_version"].get<int>() != kForestFormatVersion)
    throw_schema(origin + ": unsupported forest format version");

  ForestModel model;
  const auto& cfg = doc.at("config");
  model.config.n_trees = cfg.at("n_trees").get<int>();
  model.config.min_samples_leaf = cfg.at("min_samples_leaf").get<int>();
  model.config.max_depth = cfg.at("max_depth").get<int>();
  model.config.features_per_split = cfg.at("features_per_split").get<int>();
  model.config.bootstrap = cfg.at("bootstrap").get<bool>();
  model.seed = doc.at("seed").get<uint64_t>();
  model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
  for (const auto& tj : doc.at("trees")) {
    Tree t;
    for (const auto& nj : tj) {
      TreeNode n;
      n.feature = nj.at("f").get<int>();
      n.threshold = nj.at("t").get<double>();
      n.left = nj.at("l").get<int>();
      n.right = nj.at("r").get<int>();
      n.value = nj.at("v").get<double>();
      t.nodes.push_back(n);
    }
    if (t.nodes.empty()) throw_schema(origin + ": empty tree");
    model.trees.push_back(std::move(t));
  }
  if (model.trees.empty()) throw_schema(origin + ": forest has no trees");
  return model;
}

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(model));
}

ForestModel load_forest(const std::filesystem::path& path) {
  return from_json(read_text_file(path), path.string());
}

}  // namespace clue::forest
