#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "metatutor/domain.hpp"

namespace metatutor {

struct SessionLog;

/// Observable pre-test behavior, laid out as pretest_feature_names().
struct PretestFeatures {
  std::vector<double> values;
};

const std::vector<std::string>& pretest_feature_names();
PretestFeatures pretest_features(const SessionLog& log);

struct LabeledExample {
  PretestFeatures x;
  MetacognitiveGroup y = MetacognitiveGroup::Declarative;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  MetacognitiveGroup label = MetacognitiveGroup::Declarative;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestOptions {
  int n_trees = 50;
  int max_depth = 8;  // 0 = unbounded
  std::uint64_t seed = 0;
  bool bootstrap = true;
  friend bool operator==(const ForestOptions&, const ForestOptions&) = default;
};

struct Forest {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  ForestOptions options;
  friend bool operator==(const Forest&, const Forest&) = default;
};

/// Gini-greedy trees over random feature subsets of size ceil(sqrt(d)).
Forest train_forest(const std::vector<LabeledExample>& data, const ForestOptions& options = {});

MetacognitiveGroup predict(const DecisionTree& tree, const PretestFeatures& x);
/// Majority vote; ties go to the earliest group (Declarative < Procedural < Conditional).
MetacognitiveGroup predict(const Forest& forest, const PretestFeatures& x);

double accuracy(const Forest& forest, const std::vector<LabeledExample>& test);

void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace metatutor
