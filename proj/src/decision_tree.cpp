#include "adl/decision_tree.hpp"

#include <algorithm>

#include "adl/types.hpp"

namespace adl {
namespace {

double gini(double pos, double n) {
  if (n <= 0.0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child impurity
};

}  // namespace

DecisionTree DecisionTree::fit(const std::vector<std::vector<double>>& rows,
                               const std::vector<int>& y, const TreeConfig& config) {
  if (rows.empty() || rows.size() != y.size()) {
    throw Error("invalid_argument", "tree needs a non-empty training set with one label per row");
  }
  if (config.min_leaf < 1) throw Error("invalid_argument", "min_leaf must be >= 1");
  DecisionTree tree;
  tree.n_features_ = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != tree.n_features_) throw Error("invalid_argument", "ragged feature rows");
  }
  for (int label : y) {
    if (label != 0 && label != 1) throw Error("invalid_argument", "tree labels must be 0 or 1");
  }
  std::vector<std::size_t> idx(rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  tree.build(rows, y, idx, 0, idx.size(), 0, config);
  return tree;
}

int DecisionTree::build(const std::vector<std::vector<double>>& rows, const std::vector<int>& y,
                        std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth,
                        const TreeConfig& config) {
  const std::size_t n = hi - lo;
  std::size_t pos = 0;
  for (std::size_t i = lo; i < hi; ++i) pos += static_cast<std::size_t>(y[idx[i]]);

  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  {
    TreeNode& node = nodes_.back();
    node.samples = n;
    node.depth = depth;
    node.leaf_class = 2 * pos > n ? 1 : 0;
    node.purity = static_cast<double>(node.leaf_class ? pos : n - pos) / static_cast<double>(n);
  }

  const bool depth_done = config.max_depth >= 0 && depth >= config.max_depth;
  const auto min_leaf = static_cast<std::size_t>(config.min_leaf);
  if (depth_done || pos == 0 || pos == n || n < 2 * min_leaf) return id;

  const double parent = gini(static_cast<double>(pos), static_cast<double>(n));
  Split best;
  best.impurity = parent;
  std::vector<std::size_t> order(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                 idx.begin() + static_cast<std::ptrdiff_t>(hi));
  for (std::size_t f = 0; f < n_features_; ++f) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rows[a][f] < rows[b][f]; });
    std::size_t left_pos = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_pos += static_cast<std::size_t>(y[order[i]]);
      const double v = rows[order[i]][f];
      const double next = rows[order[i + 1]][f];
      if (!(v < next)) continue;
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double imp = (static_cast<double>(nl) * gini(static_cast<double>(left_pos), static_cast<double>(nl)) +
                          static_cast<double>(nr) *
                              gini(static_cast<double>(pos - left_pos), static_cast<double>(nr))) /
                         static_cast<double>(n);
      if (imp < best.impurity - 1e-12) {
        best.feature = static_cast<int>(f);
        best.threshold = v + (next - v) / 2.0;
        if (!(best.threshold < next)) best.threshold = v;
        best.impurity = imp;
      }
    }
  }
  if (best.feature < 0) return id;

  auto mid = std::stable_partition(
      idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(hi),
      [&](std::size_t r) { return rows[r][static_cast<std::size_t>(best.feature)] <= best.threshold; });
  const auto split = static_cast<std::size_t>(mid - idx.begin());

  const int left = build(rows, y, idx, lo, split, depth + 1, config);
  const int right = build(rows, y, idx, split, hi, depth + 1, config);
  TreeNode& node = nodes_[static_cast<std::size_t>(id)];
  node.feature = best.feature;
  node.threshold = best.threshold;
  node.left = left;
  node.right = right;
  return id;
}

int DecisionTree::leaf_for(std::span<const double> x) const {
  if (nodes_.empty()) throw Error("invalid_argument", "tree is not trained");
  if (x.size() != n_features_) throw Error("invalid_argument", "feature vector length mismatch");
  int at = 0;
  while (!nodes_[static_cast<std::size_t>(at)].is_leaf()) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(at)];
    at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return at;
}

int DecisionTree::predict(std::span<const double> x) const {
  return nodes_[static_cast<std::size_t>(leaf_for(x))].leaf_class;
}

std::vector<TraceStep> DecisionTree::trace(std::span<const double> x) const {
  std::vector<TraceStep> steps;
  int at = 0;
  leaf_for(x);  // validates input
  while (!nodes_[static_cast<std::size_t>(at)].is_leaf()) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(at)];
    const bool right = x[static_cast<std::size_t>(n.feature)] > n.threshold;
    steps.push_back({at, n.feature, n.threshold, right});
    at = right ? n.right : n.left;
  }
  return steps;
}

int DecisionTree::replay(std::span<const TraceStep> steps) const {
  if (nodes_.empty()) throw Error("invalid_argument", "tree is not trained");
  int at = 0;
  for (const auto& s : steps) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(at)];
    if (n.is_leaf() || s.node != at || s.feature != n.feature) {
      throw Error("invalid_argument", "trace does not match tree");
    }
    at = s.went_right ? n.right : n.left;
  }
  if (!nodes_[static_cast<std::size_t>(at)].is_leaf()) {
    throw Error("invalid_argument", "trace stops before a leaf");
  }
  return at;
}

int DecisionTree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

nlohmann::json DecisionTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"class", n.leaf_class},
                     {"purity", n.purity},
                     {"samples", n.samples},
                     {"depth", n.depth}});
  }
  return {{"n_features", n_features_}, {"nodes", nodes}};
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
  DecisionTree t;
  t.n_features_ = j.at("n_features").get<std::size_t>();
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.feature = n.at("feature").get<int>();
    node.threshold = n.at("threshold").get<double>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.leaf_class = n.at("class").get<int>();
    node.purity = n.at("purity").get<double>();
    node.samples = n.at("samples").get<std::size_t>();
    node.depth = n.at("depth").get<int>();
    t.nodes_.push_back(node);
  }
  const auto count = static_cast<int>(t.nodes_.size());
  for (const auto& n : t.nodes_) {
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count ||
                         n.feature >= static_cast<int>(t.n_features_))) {
      throw Error("parse", "tree node references are out of range");
    }
  }
  if (t.nodes_.empty()) throw Error("parse", "tree has no nodes");
  return t;
}

}  // namespace adl
