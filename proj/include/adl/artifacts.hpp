// include/adl/artifacts.hpp
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "adl/anomaly.hpp"
#include "adl/detectors.hpp"
#include "adl/hmm.hpp"

namespace adl {

// Bumped whenever an on-disk artifact layout changes.
inline constexpr int kArtifactVersion = 1;

nlohmann::json model_to_json(const HmmModel& model);
HmmModel model_from_json(const nlohmann::json& doc);
void save_model(const std::filesystem::path& path, const HmmModel& model);
HmmModel load_model(const std::filesystem::path& path);

struct AnomalyArtifacts {
  GaussianStats stats;
  FeatureDetectors detectors;
  LabelMarginals marginals{};
  std::string model_fingerprint;
  std::uint64_t seed = 0;
  int n_synth_days = 0;

  bool operator==(const AnomalyArtifacts&) const = default;
};

nlohmann::json stats_to_json(const GaussianStats& stats);
GaussianStats stats_from_json(const nlohmann::json& doc);

nlohmann::json anomaly_to_json(const AnomalyArtifacts& artifacts);
AnomalyArtifacts anomaly_from_json(const nlohmann::json& doc);
void save_anomaly(const std::filesystem::path& path, const AnomalyArtifacts& artifacts);
AnomalyArtifacts load_anomaly(const std::filesystem::path& path);

// Throws Error{"version"} when the detectors were fit against another model.
void check_compatible(const HmmModel& model, const AnomalyArtifacts& artifacts);

// Everything produced while fitting the anomaly layer, kept for evaluation.
struct AnomalyFit {
  AnomalyArtifacts artifacts;
  std::vector<FeaturizedSegment> rows;  // real rows first, then synthetic
  std::vector<AnomalyVerdict> labels;   // CI-rule label per row
  std::size_t real_rows = 0;
};

// Gaussian priors from the recording's annotated segments, synthetic days
// appended after the last real day, CI-rule labels on the merged set, and
// one tree per feature trained on it.
AnomalyFit fit_anomaly(const Recording& recording, const HmmModel& model, std::uint64_t seed,
                       int n_synth_days, const TreeConfig& config);

}  // namespace adl
