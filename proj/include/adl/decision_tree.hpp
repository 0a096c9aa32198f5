// include/adl/decision_tree.hpp
#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace adl {

struct TreeConfig {
  int max_depth = 6;  // < 0: unlimited
  int min_leaf = 5;

  bool operator==(const TreeConfig&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;     // x[feature] <= threshold
  int right = -1;    // x[feature] >  threshold
  int leaf_class = 0;
  double purity = 1.0;  // majority share of training rows reaching the node
  std::size_t samples = 0;
  int depth = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct TraceStep {
  int node = 0;
  int feature = 0;
  double threshold = 0.0;
  bool went_right = false;

  bool operator==(const TraceStep&) const = default;
};

// Binary CART classifier with Gini impurity and axis-aligned splits.
// Class 0 is "normal", class 1 "abnormal"; majority ties resolve to 0.
class DecisionTree {
 public:
  DecisionTree() = default;

  static DecisionTree fit(const std::vector<std::vector<double>>& rows, const std::vector<int>& y,
                          const TreeConfig& config);

  int predict(std::span<const double> x) const;
  int leaf_for(std::span<const double> x) const;
  // Splits taken from the root to the leaf that x reaches.
  std::vector<TraceStep> trace(std::span<const double> x) const;
  // Follows recorded branch decisions without looking at any input.
  int replay(std::span<const TraceStep> steps) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  int depth() const;
  std::size_t n_features() const { return n_features_; }

  nlohmann::json to_json() const;
  static DecisionTree from_json(const nlohmann::json& j);

  bool operator==(const DecisionTree&) const = default;

 private:
  int build(const std::vector<std::vector<double>>& rows, const std::vector<int>& y,
            std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth,
            const TreeConfig& config);

  std::vector<TreeNode> nodes_;
  std::size_t n_features_ = 0;
};

}  // namespace adl
