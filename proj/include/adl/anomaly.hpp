// include/adl/anomaly.hpp
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "adl/hmm.hpp"
#include "adl/ingest.hpp"
#include "adl/types.hpp"

namespace adl {

// Contextual features of an activity, in explanation order.
enum class Feature : std::uint8_t { Transition = 0, Duration, Frequency, StartHour };

inline constexpr std::array<Feature, 4> kFeatures = {Feature::Transition, Feature::Duration,
                                                     Feature::Frequency, Feature::StartHour};

constexpr std::size_t index_of(Feature f) { return static_cast<std::size_t>(f); }
std::string_view to_string(Feature f);         // "transition", "duration", ...
std::string_view value_name(Feature f);        // "transition_prob", "duration_min", ...
Feature feature_from_string(std::string_view name);

// Two-sided 90% normal interval and the transition cut-off.
inline constexpr double kCiZ = 1.6449;
inline constexpr double kTransitionThreshold = 0.05;

// Half-open [start_slice, end_slice) within `day`. Synthetic segments may
// run past the day's last slice.
struct ActivitySegment {
  ActivityLabel label = ActivityLabel::IdleUnlabeled;
  int start_slice = 0;
  int end_slice = 0;
  Timestamp day = 0;

  int duration() const { return end_slice - start_slice; }
  bool operator==(const ActivitySegment&) const = default;
};

struct ContextFeatures {
  ActivityLabel label = ActivityLabel::IdleUnlabeled;
  std::optional<ActivityLabel> prev_label;  // nullopt: first segment of the day
  double transition_prob = 0.0;
  int duration_min = 0;
  int frequency_today = 0;
  double start_hour = 0.0;

  double value(Feature f) const;
  bool operator==(const ContextFeatures&) const = default;
};

struct FeaturizedSegment {
  ActivitySegment segment;
  ContextFeatures features;
  bool synthetic = false;

  bool operator==(const FeaturizedSegment&) const = default;
};

// Maximal constant-label runs of one day's labels.
std::vector<ActivitySegment> segment_day(std::span<const ActivityLabel> labels, Timestamp day);

// Runs over a multi-day path; day d owns path[d*slices_per_day, (d+1)*slices_per_day).
std::vector<ActivitySegment> segment(std::span<const ActivityLabel> path,
                                     std::span<const Timestamp> day_dates,
                                     int slices_per_day = kSlicesPerDay);

// Ground-truth segments of a labelled recording.
std::vector<ActivitySegment> segment_labels(const Recording& recording);

// Day-initial segments take pi[label] as their transition probability.
std::vector<FeaturizedSegment> featurize(std::span<const ActivitySegment> segments,
                                         const HmmModel& model);

struct Gaussian {
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t n = 0;

  bool usable() const { return n >= 2; }
  bool operator==(const Gaussian&) const = default;
};

// Per-activity Gaussians for duration, frequency and start hour.
class GaussianStats {
 public:
  const Gaussian& get(ActivityLabel label, Feature f) const;
  Gaussian& at(ActivityLabel label, Feature f);

  bool operator==(const GaussianStats&) const = default;

 private:
  static std::size_t slot(Feature f);
  std::array<std::array<Gaussian, 3>, kNumLabels> entries_{};
};

// Sample mean and (n-1) standard deviation per label and feature.
GaussianStats fit_gaussians(std::span<const FeaturizedSegment> rows);

struct AnomalyVerdict {
  std::array<bool, 4> flags{};
  std::array<int, 4> direction{};  // +1 above the mean, -1 below, 0 not flagged
  bool any = false;
  ActivityLabel expected_next = ActivityLabel::IdleUnlabeled;

  bool flag(Feature f) const { return flags[index_of(f)]; }
  bool operator==(const AnomalyVerdict&) const = default;
};

// Value outside mu +- kCiZ * sigma. Unusable entries never flag.
bool outside_ci(const Gaussian& g, double value);

// CI rule on duration/frequency/start hour, transition_prob < 0.05, and the
// most likely next activity from the previous label's transition row.
AnomalyVerdict rule_label(const ContextFeatures& features, const GaussianStats& stats,
                          const HmmModel& model);

// Most likely successor of `prev` (or most likely day-initial activity).
ActivityLabel expected_next(const HmmModel& model, std::optional<ActivityLabel> prev);

using LabelMarginals = std::array<double, kNumLabels>;

// Fraction of segments carrying each label.
LabelMarginals label_marginals(std::span<const FeaturizedSegment> rows);

// Draws labels from the marginals (never repeating the previous label when
// another label has mass) and durations from that label's duration Gaussian,
// rounded and truncated at 1 minute, until n_days of time is filled. Days
// are numbered from first_day. Deterministic under seed.
std::vector<FeaturizedSegment> gen_synthetic(const GaussianStats& stats,
                                             const LabelMarginals& marginals, int n_days,
                                             std::uint64_t seed, const HmmModel& model,
                                             Timestamp first_day);

}  // namespace adl
