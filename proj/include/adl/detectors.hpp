// include/adl/detectors.hpp
#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "adl/anomaly.hpp"
#include "adl/decision_tree.hpp"
#include "adl/metrics.hpp"

namespace adl {

// Tree input: one indicator per activity followed by the feature's value.
inline constexpr std::size_t kDetectorInputs = kNumLabels + 1;

std::vector<double> detector_input(Feature f, const ContextFeatures& features);
std::string detector_input_name(Feature f, std::size_t column);

struct ExplanationStep {
  TraceStep step;
  std::string text;  // "duration_min > 73.5", "activity is not Toileting"
};

struct Explanation {
  Feature feature = Feature::Duration;
  std::vector<ExplanationStep> steps;
  int leaf = 0;
  bool abnormal = false;
  double purity = 1.0;

  // "activity is Leaving, duration_min > 73.5 → abnormal"
  std::string text() const;
};

struct FeatureDetectors {
  std::array<DecisionTree, 4> trees;
  TreeConfig config;

  const DecisionTree& tree(Feature f) const { return trees[index_of(f)]; }
  bool predict(Feature f, const ContextFeatures& features) const;
  std::array<bool, 4> predict_all(const ContextFeatures& features) const;

  bool operator==(const FeatureDetectors&) const = default;
};

// One tree per feature, each fit to that feature's rule label.
// Throws Error{"single_class"} naming the feature when a target has one class.
FeatureDetectors train_detectors(std::span<const FeaturizedSegment> rows,
                                 std::span<const AnomalyVerdict> labels, const TreeConfig& config);

Explanation explain_tree(const FeatureDetectors& detectors, Feature f,
                         const ContextFeatures& features);

struct DetectorScore {
  Feature feature = Feature::Duration;
  double accuracy = 0.0;
  double f1_macro = 0.0;     // mean F1 of the normal and abnormal classes
  double f1_abnormal = 0.0;  // F1 of the abnormal class alone
  Confusion confusion{2};
  std::size_t positives = 0;
};

struct DetectorEvalReport {
  std::array<DetectorScore, 4> scores;
  std::size_t folds = 0;
  std::size_t rows = 0;
};

// Rows grouped into folds by segment day (real and synthetic days alike).
DetectorEvalReport evaluate_detectors_lodo(std::span<const FeaturizedSegment> rows,
                                           std::span<const AnomalyVerdict> labels,
                                           const TreeConfig& config);

}  // namespace adl
