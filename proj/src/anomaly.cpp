#include "adl/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace adl {
namespace {

constexpr std::array<std::string_view, 4> kFeatureNames = {"transition", "duration", "frequency",
                                                           "start_hour"};
constexpr std::array<std::string_view, 4> kValueNames = {"transition_prob", "duration_min",
                                                         "frequency_today", "start_hour"};

}  // namespace

std::string_view to_string(Feature f) { return kFeatureNames[index_of(f)]; }
std::string_view value_name(Feature f) { return kValueNames[index_of(f)]; }

Feature feature_from_string(std::string_view name) {
  for (auto f : kFeatures) {
    if (to_string(f) == name || value_name(f) == name) return f;
  }
  throw Error("parse", "unknown feature '" + std::string(name) + "'");
}

double ContextFeatures::value(Feature f) const {
  switch (f) {
    case Feature::Transition: return transition_prob;
    case Feature::Duration: return duration_min;
    case Feature::Frequency: return frequency_today;
    case Feature::StartHour: return start_hour;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Segmentation and features
// ---------------------------------------------------------------------------

std::vector<ActivitySegment> segment_day(std::span<const ActivityLabel> labels, Timestamp day) {
  std::vector<ActivitySegment> out;
  std::size_t start = 0;
  for (std::size_t t = 1; t <= labels.size(); ++t) {
    if (t == labels.size() || labels[t] != labels[start]) {
      out.push_back({labels[start], static_cast<int>(start), static_cast<int>(t), day});
      start = t;
    }
  }
  return out;
}

std::vector<ActivitySegment> segment(std::span<const ActivityLabel> path,
                                     std::span<const Timestamp> day_dates, int slices_per_day) {
  if (slices_per_day <= 0) throw Error("invalid_argument", "slices_per_day must be positive");
  std::vector<ActivitySegment> out;
  const auto per_day = static_cast<std::size_t>(slices_per_day);
  for (std::size_t d = 0; d * per_day < path.size(); ++d) {
    if (d >= day_dates.size()) throw Error("invalid_argument", "path extends past the given days");
    const std::size_t len = std::min(per_day, path.size() - d * per_day);
    auto day = segment_day(path.subspan(d * per_day, len), day_dates[d]);
    out.insert(out.end(), day.begin(), day.end());
  }
  return out;
}

std::vector<ActivitySegment> segment_labels(const Recording& recording) {
  std::vector<ActivitySegment> out;
  for (const auto& d : recording.days) {
    std::vector<ActivityLabel> labels;
    labels.reserve(d.slices.size());
    for (const auto& s : d.slices) {
      if (!s.y) throw Error("invalid_argument", "recording has unlabeled slices");
      labels.push_back(*s.y);
    }
    auto segs = segment_day(labels, d.date);
    out.insert(out.end(), segs.begin(), segs.end());
  }
  return out;
}

std::vector<FeaturizedSegment> featurize(std::span<const ActivitySegment> segments,
                                         const HmmModel& model) {
  std::vector<FeaturizedSegment> out;
  out.reserve(segments.size());
  std::array<int, kNumLabels> freq{};
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    if (seg.end_slice <= seg.start_slice) throw Error("invalid_argument", "empty segment");
    const std::size_t cur = model.require_state(seg.label);
    const bool day_start = i == 0 || segments[i - 1].day != seg.day;
    if (day_start) freq.fill(0);

    ContextFeatures f;
    f.label = seg.label;
    if (day_start) {
      f.transition_prob = model.pi[cur];
    } else {
      f.prev_label = segments[i - 1].label;
      f.transition_prob = model.A[model.require_state(*f.prev_label)][cur];
    }
    f.duration_min = seg.duration();
    f.frequency_today = ++freq[index_of(seg.label)];
    f.start_hour = static_cast<double>(seg.start_slice) * kSliceSeconds / 3600.0;
    out.push_back({seg, f, false});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian priors and the CI rule
// ---------------------------------------------------------------------------

std::size_t GaussianStats::slot(Feature f) {
  switch (f) {
    case Feature::Duration: return 0;
    case Feature::Frequency: return 1;
    case Feature::StartHour: return 2;
    case Feature::Transition: break;
  }
  throw Error("invalid_argument", "transition has no Gaussian prior");
}

const Gaussian& GaussianStats::get(ActivityLabel label, Feature f) const {
  return entries_[index_of(label)][slot(f)];
}

Gaussian& GaussianStats::at(ActivityLabel label, Feature f) {
  return entries_[index_of(label)][slot(f)];
}

GaussianStats fit_gaussians(std::span<const FeaturizedSegment> rows) {
  GaussianStats stats;
  for (auto label : kAllLabels) {
    for (auto f : {Feature::Duration, Feature::Frequency, Feature::StartHour}) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& r : rows) {
        if (r.features.label != label) continue;
        sum += r.features.value(f);
        ++n;
      }
      Gaussian& g = stats.at(label, f);
      g.n = n;
      if (n == 0) continue;
      g.mu = sum / static_cast<double>(n);
      if (n < 2) continue;
      double ss = 0.0;
      for (const auto& r : rows) {
        if (r.features.label != label) continue;
        const double d = r.features.value(f) - g.mu;
        ss += d * d;
      }
      g.sigma = std::sqrt(ss / static_cast<double>(n - 1));
    }
  }
  return stats;
}

bool outside_ci(const Gaussian& g, double value) {
  if (!g.usable()) return false;
  return std::abs(value - g.mu) > kCiZ * g.sigma;
}

ActivityLabel expected_next(const HmmModel& model, std::optional<ActivityLabel> prev) {
  const std::vector<double>& row = prev ? model.A[model.require_state(*prev)] : model.pi;
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return model.states[best];
}

AnomalyVerdict rule_label(const ContextFeatures& features, const GaussianStats& stats,
                          const HmmModel& model) {
  AnomalyVerdict v;
  v.flags[index_of(Feature::Transition)] = features.transition_prob < kTransitionThreshold;
  v.direction[index_of(Feature::Transition)] = v.flags[index_of(Feature::Transition)] ? -1 : 0;
  for (auto f : {Feature::Duration, Feature::Frequency, Feature::StartHour}) {
    const Gaussian& g = stats.get(features.label, f);
    const double value = features.value(f);
    const bool flagged = outside_ci(g, value);
    v.flags[index_of(f)] = flagged;
    v.direction[index_of(f)] = flagged ? (value > g.mu ? 1 : -1) : 0;
  }
  v.any = std::any_of(v.flags.begin(), v.flags.end(), [](bool b) { return b; });
  v.expected_next = expected_next(model, features.prev_label);
  return v;
}

// ---------------------------------------------------------------------------
// Synthetic abnormal data
// ---------------------------------------------------------------------------

LabelMarginals label_marginals(std::span<const FeaturizedSegment> rows) {
  LabelMarginals m{};
  if (rows.empty()) return m;
  for (const auto& r : rows) m[index_of(r.features.label)] += 1.0;
  for (auto& v : m) v /= static_cast<double>(rows.size());
  return m;
}

std::vector<FeaturizedSegment> gen_synthetic(const GaussianStats& stats,
                                             const LabelMarginals& marginals, int n_days,
                                             std::uint64_t seed, const HmmModel& model,
                                             Timestamp first_day) {
  if (n_days <= 0) throw Error("invalid_argument", "n_days must be positive");
  int positive = 0;
  for (auto label : kAllLabels) {
    if (marginals[index_of(label)] <= 0.0) continue;
    ++positive;
    if (!stats.get(label, Feature::Duration).usable()) {
      throw Error("invalid_argument", "no usable duration prior for " + std::string(to_string(label)));
    }
  }
  if (positive == 0) throw Error("invalid_argument", "label marginals have no mass");

  std::mt19937_64 rng(seed);
  const std::int64_t horizon = static_cast<std::int64_t>(n_days) * kSlicesPerDay;
  std::vector<ActivitySegment> segs;
  std::int64_t clock = 0;
  std::optional<ActivityLabel> prev;
  while (clock < horizon) {
    LabelMarginals weights = marginals;
    if (prev && positive > 1) weights[index_of(*prev)] = 0.0;
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const auto label = static_cast<ActivityLabel>(pick(rng));

    const Gaussian& g = stats.get(label, Feature::Duration);
    double draw = g.mu;
    if (g.sigma > 0.0) draw = std::normal_distribution<double>(g.mu, g.sigma)(rng);
    const auto duration = std::max<std::int64_t>(1, std::llround(draw));

    const std::int64_t day = clock / kSlicesPerDay;
    const auto start = static_cast<int>(clock % kSlicesPerDay);
    segs.push_back({label, start, start + static_cast<int>(duration), first_day + day * kSecondsPerDay});
    clock += duration;
    prev = label;
  }

  auto rows = featurize(segs, model);
  for (auto& r : rows) r.synthetic = true;
  return rows;
}

}  // namespace adl
