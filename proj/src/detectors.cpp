#include "adl/detectors.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <map>

namespace adl {
namespace {

std::string format_threshold(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void check_sizes(std::span<const FeaturizedSegment> rows, std::span<const AnomalyVerdict> labels) {
  if (rows.size() != labels.size()) {
    throw Error("invalid_argument", "need one rule label per featurized row");
  }
  if (rows.empty()) throw Error("invalid_argument", "no training rows");
}

}  // namespace

std::vector<double> detector_input(Feature f, const ContextFeatures& features) {
  std::vector<double> x(kDetectorInputs, 0.0);
  x[index_of(features.label)] = 1.0;
  x[kNumLabels] = features.value(f);
  return x;
}

std::string detector_input_name(Feature f, std::size_t column) {
  if (column < kNumLabels) return "is_" + std::string(to_string(kAllLabels[column]));
  return std::string(value_name(f));
}

std::string Explanation::text() const {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += ", ";
    out += steps[i].text;
  }
  if (!out.empty()) out += " ";
  out += abnormal ? "→ abnormal" : "→ normal";
  return out;
}

bool FeatureDetectors::predict(Feature f, const ContextFeatures& features) const {
  return tree(f).predict(detector_input(f, features)) == 1;
}

std::array<bool, 4> FeatureDetectors::predict_all(const ContextFeatures& features) const {
  std::array<bool, 4> out{};
  for (auto f : kFeatures) out[index_of(f)] = predict(f, features);
  return out;
}

FeatureDetectors train_detectors(std::span<const FeaturizedSegment> rows,
                                 std::span<const AnomalyVerdict> labels, const TreeConfig& config) {
  check_sizes(rows, labels);
  FeatureDetectors d;
  d.config = config;
  for (auto f : kFeatures) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    x.reserve(rows.size());
    y.reserve(rows.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      x.push_back(detector_input(f, rows[i].features));
      y.push_back(labels[i].flag(f) ? 1 : 0);
      pos += static_cast<std::size_t>(y.back());
    }
    if (pos == 0 || pos == rows.size()) {
      throw Error("single_class", "feature '" + std::string(to_string(f)) +
                                      "' has a single class in the training set");
    }
    d.trees[index_of(f)] = DecisionTree::fit(x, y, config);
  }
  return d;
}

Explanation explain_tree(const FeatureDetectors& detectors, Feature f,
                         const ContextFeatures& features) {
  const DecisionTree& tree = detectors.tree(f);
  const auto x = detector_input(f, features);
  Explanation e;
  e.feature = f;
  for (const auto& step : tree.trace(x)) {
    ExplanationStep s{step, {}};
    const auto col = static_cast<std::size_t>(step.feature);
    if (col < kNumLabels) {
      s.text = std::string(step.went_right ? "activity is " : "activity is not ") +
               std::string(to_string(kAllLabels[col]));
    } else {
      s.text = std::string(value_name(f)) + (step.went_right ? " > " : " <= ") +
               format_threshold(step.threshold);
    }
    e.steps.push_back(std::move(s));
  }
  e.leaf = tree.leaf_for(x);
  const TreeNode& leaf = tree.node(e.leaf);
  e.abnormal = leaf.leaf_class == 1;
  e.purity = leaf.purity;
  return e;
}

DetectorEvalReport evaluate_detectors_lodo(std::span<const FeaturizedSegment> rows,
                                           std::span<const AnomalyVerdict> labels,
                                           const TreeConfig& config) {
  check_sizes(rows, labels);
  std::map<Timestamp, std::vector<std::size_t>> by_day;
  for (std::size_t i = 0; i < rows.size(); ++i) by_day[rows[i].segment.day].push_back(i);
  if (by_day.size() < 2) throw Error("invalid_argument", "leave-one-day-out needs at least 2 days");

  std::vector<std::vector<std::size_t>> folds;
  for (auto& [day, idx] : by_day) folds.push_back(std::move(idx));

  DetectorEvalReport report;
  report.folds = folds.size();
  report.rows = rows.size();

  for (auto f : kFeatures) {
    std::vector<std::vector<double>> x(rows.size());
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      x[i] = detector_input(f, rows[i].features);
      y[i] = labels[i].flag(f) ? 1 : 0;
    }
    auto run_fold = [&](std::size_t k) {
      std::vector<std::vector<double>> tx;
      std::vector<int> ty;
      std::vector<char> mine(rows.size(), 0);
      for (auto i : folds[k]) mine[i] = 1;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (mine[i]) continue;
        tx.push_back(x[i]);
        ty.push_back(y[i]);
      }
      const DecisionTree tree = DecisionTree::fit(tx, ty, config);
      Confusion c(2);
      for (auto i : folds[k]) c.add(static_cast<std::size_t>(y[i]), static_cast<std::size_t>(tree.predict(x[i])));
      return c;
    };
    std::vector<std::future<Confusion>> futures;
    for (std::size_t k = 0; k < folds.size(); ++k) {
      futures.push_back(std::async(std::launch::async, run_fold, k));
    }
    DetectorScore& s = report.scores[index_of(f)];
    s.feature = f;
    s.confusion = Confusion(2);
    for (auto& fut : futures) s.confusion.merge(fut.get());
    s.accuracy = s.confusion.accuracy();
    s.f1_abnormal = s.confusion.f1(1);
    s.f1_macro = (s.confusion.f1(0) + s.confusion.f1(1)) / 2.0;
    s.positives = s.confusion.support(1);
  }
  return report;
}

}  // namespace adl
