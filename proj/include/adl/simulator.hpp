// include/adl/simulator.hpp
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adl/anomaly.hpp"
#include "adl/artifacts.hpp"
#include "adl/hmm.hpp"
#include "adl/household.hpp"
#include "adl/ingest.hpp"

namespace adl {

enum class UseCase : std::uint8_t {
  FrequentToilet,
  AbnormalLeaving,
  AbnormalSleeping,
  ProlongedIdle,
  AbnormalEating,
};

std::string_view to_string(UseCase u);
UseCase use_case_from_string(std::string_view name);

enum class ShiftMode : std::uint8_t { Duration, StartHour };

struct Injection {
  UseCase use_case = UseCase::FrequentToilet;
  int day = 0;                 // index into the base recording's days
  int k = 4;                   // frequent_toilet: extra segments, 1..20
  int minutes = 120;           // prolonged_idle: target run length, 1..1440
  ShiftMode mode = ShiftMode::Duration;           // leaving / sleeping / eating
  ActivityLabel meal = ActivityLabel::Lunch;      // eating: which meal
  int margin = 30;             // minutes beyond the 90% interval, 1..600

  // The feature the injection is meant to push outside its prior.
  Feature target_feature() const;
  void validate() const;
};

// Most frequent sensor vector per label in the training data (ties to the
// lexicographically smallest). Labels never seen map to all-off.
struct ModalPatterns {
  int n_sensors = 0;
  std::array<std::optional<Observation>, kNumLabels> x;

  Observation at(ActivityLabel label) const;
};

ModalPatterns modal_patterns(const Recording& recording);

struct InjectionContext {
  const GaussianStats* stats = nullptr;
  const HmmModel* model = nullptr;
  ModalPatterns patterns;
  std::uint64_t seed = 0;
};

struct ManifestEntry {
  UseCase use_case = UseCase::FrequentToilet;
  int day_index = 0;
  Timestamp day = 0;
  ActivityLabel activity = ActivityLabel::Toileting;
  Feature feature = Feature::Frequency;
  std::vector<ActivitySegment> segments;  // injected or reshaped runs
  // Segments of the injected day whose target feature the CI rule flags on
  // ground truth, after and before the injection.
  int expected_flagged = 0;
  int baseline_flagged = 0;
};

nlohmann::json to_json(const ManifestEntry& m);

// Returns the modified recording. Day length is preserved; every relabeled
// slice gets its new label's modal sensor vector. Throws Error{"injection"}
// naming the day and use case when nothing matches.
Recording inject(const Recording& recording, const Injection& injection,
                 const InjectionContext& context, ManifestEntry* manifest = nullptr);

struct ScenarioBase {
  std::optional<HouseholdConfig> household;
  std::filesystem::path dataset_dir;  // OrdonezA-format files
  std::filesystem::path slices_file;  // JSONL slices
  std::filesystem::path sensor_map;   // optional, dataset_dir only
};

struct Scenario {
  ScenarioBase base;
  std::vector<Injection> injections;
  double speed = std::numeric_limits<double>::infinity();  // >= 1
  std::uint64_t seed = 0;
  std::vector<int> replay_days;  // empty: the injected days, or every day
  double smoothing = 1.0;
  int n_synth_days = 30;
  int lag = 30;

  void validate() const;
};

inline constexpr int kScenarioVersion = 1;

Scenario scenario_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);

Recording load_base(const Scenario& scenario);

// Model and anomaly artifacts fit on the scenario's base recording.
struct TrainedArtifacts {
  HmmModel model;
  AnomalyArtifacts anomaly;
};
TrainedArtifacts train_artifacts(const Recording& base, const Scenario& scenario);

struct PreparedScenario {
  Recording base;
  Recording injected;  // every day
  Recording replay;    // the days to stream
  std::vector<ManifestEntry> manifest;
};

PreparedScenario prepare_scenario(const Scenario& scenario, const Recording& base,
                                  const HmmModel& model, const AnomalyArtifacts& artifacts);

struct ReplayReport {
  std::size_t slices_sent = 0;
  double wall_seconds = 0.0;
  std::vector<ManifestEntry> manifest;
  bool aborted = false;
  std::string error;
};

nlohmann::json to_json(const ReplayReport& r);

using SliceSink = std::function<void(const TimeSlice&)>;

// Streams slices in order, one every 60 s / speed of wall time (infinite
// speed: no pacing). A throwing sink aborts the replay with a partial report.
ReplayReport replay(const Recording& recording, const SliceSink& sink, double speed,
                    std::vector<ManifestEntry> manifest = {});

}  // namespace adl
