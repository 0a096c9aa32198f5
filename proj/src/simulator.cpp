#include "adl/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <thread>

namespace adl {
namespace {

using nlohmann::json;

std::string where(const Injection& inj) {
  return std::string(to_string(inj.use_case)) + " on day " + std::to_string(inj.day);
}

std::vector<ActivityLabel> day_labels(const Day& day) {
  std::vector<ActivityLabel> out;
  out.reserve(day.slices.size());
  for (const auto& s : day.slices) out.push_back(s.y.value_or(ActivityLabel::IdleUnlabeled));
  return out;
}

void relabel(std::vector<ActivityLabel>& labels, int from, int to, ActivityLabel label) {
  std::fill(labels.begin() + from, labels.begin() + to, label);
}

// Slices whose label changed get the new label's modal sensor vector.
void apply_labels(Day& day, const std::vector<ActivityLabel>& before, const std::vector<ActivityLabel>& after,
                  const ModalPatterns& patterns) {
  for (std::size_t t = 0; t < after.size(); ++t) {
    if (after[t] == before[t]) continue;
    day.slices[t].y = after[t];
    day.slices[t].x = patterns.at(after[t]);
  }
}

int count_flagged(const std::vector<ActivityLabel>& labels, Timestamp date, Feature f,
                  const InjectionContext& ctx) {
  const auto segs = segment_day(labels, date);
  int n = 0;
  for (const auto& row : featurize(segs, *ctx.model)) {
    n += rule_label(row.features, *ctx.stats, *ctx.model).flag(f) ? 1 : 0;
  }
  return n;
}

ActivitySegment containing(const std::vector<ActivityLabel>& labels, Timestamp date, int slice) {
  for (const auto& s : segment_day(labels, date)) {
    if (s.start_slice <= slice && slice < s.end_slice) return s;
  }
  throw Error("injection", "slice " + std::to_string(slice) + " outside the day");
}

const ActivitySegment* longest(const std::vector<ActivitySegment>& segs,
                               std::initializer_list<ActivityLabel> labels) {
  const ActivitySegment* best = nullptr;
  for (const auto& s : segs) {
    if (std::find(labels.begin(), labels.end(), s.label) == labels.end()) continue;
    if (!best || s.duration() > best->duration()) best = &s;
  }
  return best;
}

// Grows [start, end) to `target` slices, forward first, then backward.
std::pair<int, int> extend(int start, int end, int target, int day_len, const Injection& inj) {
  end = std::min(day_len, start + target);
  if (end - start < target) start = std::max(0, end - target);
  if (end - start < target) throw Error("injection", where(inj) + ": target length does not fit in the day");
  return {start, end};
}

ActivityLabel label_for(const Injection& inj) {
  switch (inj.use_case) {
    case UseCase::FrequentToilet: return ActivityLabel::Toileting;
    case UseCase::AbnormalLeaving: return ActivityLabel::Leaving;
    case UseCase::AbnormalSleeping: return ActivityLabel::Sleeping;
    case UseCase::ProlongedIdle: return ActivityLabel::IdleUnlabeled;
    case UseCase::AbnormalEating: return inj.meal;
  }
  return ActivityLabel::IdleUnlabeled;
}

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  return path;
}

}  // namespace

std::string_view to_string(UseCase u) {
  switch (u) {
    case UseCase::FrequentToilet: return "frequent_toilet";
    case UseCase::AbnormalLeaving: return "abnormal_leaving";
    case UseCase::AbnormalSleeping: return "abnormal_sleeping";
    case UseCase::ProlongedIdle: return "prolonged_idle";
    case UseCase::AbnormalEating: return "abnormal_eating";
  }
  return "?";
}

UseCase use_case_from_string(std::string_view name) {
  for (auto u : {UseCase::FrequentToilet, UseCase::AbnormalLeaving, UseCase::AbnormalSleeping,
                 UseCase::ProlongedIdle, UseCase::AbnormalEating}) {
    if (to_string(u) == name) return u;
  }
  throw Error("invalid_argument", "unknown use case '" + std::string(name) + "'");
}

Feature Injection::target_feature() const {
  switch (use_case) {
    case UseCase::FrequentToilet: return Feature::Frequency;
    case UseCase::ProlongedIdle: return Feature::Duration;
    default: return mode == ShiftMode::Duration ? Feature::Duration : Feature::StartHour;
  }
}

void Injection::validate() const {
  auto range = [&](const char* name, int v, int lo, int hi) {
    if (v < lo || v > hi) {
      throw Error("invalid_argument", std::string(to_string(use_case)) + ": " + name + " must be in [" +
                                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  };
  range("day", day, 0, 1 << 20);
  range("k", k, 1, 20);
  range("minutes", minutes, 1, kSlicesPerDay);
  range("margin", margin, 1, 600);
  if (use_case == UseCase::AbnormalEating &&
      meal != ActivityLabel::Breakfast && meal != ActivityLabel::Lunch && meal != ActivityLabel::Dinner &&
      meal != ActivityLabel::Snack) {
    throw Error("invalid_argument", "abnormal_eating: meal must be Breakfast, Lunch, Dinner or Snack");
  }
}

Observation ModalPatterns::at(ActivityLabel label) const {
  const auto& p = x[index_of(label)];
  return p ? *p : Observation(static_cast<std::size_t>(n_sensors), 0);
}

ModalPatterns modal_patterns(const Recording& recording) {
  std::array<std::map<Observation, std::size_t>, kNumLabels> counts;
  for (const auto& day : recording.days) {
    for (const auto& s : day.slices) {
      if (s.y) ++counts[index_of(*s.y)][s.x];
    }
  }
  ModalPatterns p;
  p.n_sensors = recording.n_sensors;
  for (std::size_t l = 0; l < kNumLabels; ++l) {
    std::size_t best = 0;
    for (const auto& [obs, n] : counts[l]) {
      if (n > best) {
        best = n;
        p.x[l] = obs;
      }
    }
  }
  return p;
}

json to_json(const ManifestEntry& m) {
  json segs = json::array();
  for (const auto& s : m.segments) {
    segs.push_back({{"activity", to_string(s.label)}, {"start_slice", s.start_slice}, {"end_slice", s.end_slice}});
  }
  return {{"use_case", to_string(m.use_case)},
          {"day_index", m.day_index},
          {"day", format_date(m.day)},
          {"activity", to_string(m.activity)},
          {"feature", to_string(m.feature)},
          {"segments", segs},
          {"expected_flagged", m.expected_flagged},
          {"baseline_flagged", m.baseline_flagged}};
}

Recording inject(const Recording& recording, const Injection& inj, const InjectionContext& ctx,
                 ManifestEntry* manifest) {
  inj.validate();
  if (!ctx.stats || !ctx.model) throw Error("invalid_argument", "injection needs fitted stats and a model");
  if (inj.day >= static_cast<int>(recording.days.size())) {
    throw Error("injection", where(inj) + ": the recording has " + std::to_string(recording.days.size()) + " days");
  }
  Recording out = recording;
  Day& day = out.days[static_cast<std::size_t>(inj.day)];
  const int len = static_cast<int>(day.slices.size());
  if (len != kSlicesPerDay) throw Error("injection", where(inj) + ": day is not complete");

  auto labels = day_labels(day);
  const auto before = labels;
  const auto segs = segment_day(labels, day.date);
  const ActivityLabel target_label = label_for(inj);
  const Feature feature = inj.target_feature();
  ManifestEntry m;
  m.use_case = inj.use_case;
  m.day_index = inj.day;
  m.day = day.date;
  m.activity = target_label;
  m.feature = feature;

  switch (inj.use_case) {
    case UseCase::FrequentToilet: {
      const auto* run = longest(segs, {ActivityLabel::IdleUnlabeled, ActivityLabel::SpareTimeTV});
      if (!run) throw Error("injection", where(inj) + ": no IdleUnlabeled or SpareTimeTV run to take time from");
      std::mt19937_64 rng(ctx.seed ^ (static_cast<std::uint64_t>(inj.day) * 0x9E3779B97F4A7C15ull));
      const Gaussian& g = ctx.stats->get(ActivityLabel::Toileting, Feature::Duration);
      std::vector<int> durations;
      int total = 0;
      for (int i = 0; i < inj.k; ++i) {
        int d = 4;
        if (g.usable()) {
          d = std::clamp(static_cast<int>(std::lround(std::normal_distribution<double>(g.mu, g.sigma)(rng))), 1, 15);
        }
        durations.push_back(d);
        total += d;
      }
      const int spare = run->duration() - total;
      if (spare < 2 * (inj.k + 1)) {
        throw Error("injection", where(inj) + ": longest idle/TV run (" + std::to_string(run->duration()) +
                                     " min) cannot hold " + std::to_string(inj.k) + " toilet visits");
      }
      const int spacing = spare / (inj.k + 1);
      int pos = run->start_slice;
      for (int d : durations) {
        pos += spacing;
        relabel(labels, pos, pos + d, ActivityLabel::Toileting);
        m.segments.push_back({ActivityLabel::Toileting, pos, pos + d, day.date});
        pos += d;
      }
      break;
    }
    case UseCase::ProlongedIdle: {
      const auto* run = longest(segs, {ActivityLabel::IdleUnlabeled});
      if (!run) throw Error("injection", where(inj) + ": no IdleUnlabeled run on that day");
      if (run->duration() >= inj.minutes) {
        throw Error("injection", where(inj) + ": idle run already lasts " + std::to_string(run->duration()) + " min");
      }
      const auto [s, e] = extend(run->start_slice, run->end_slice, inj.minutes, len, inj);
      relabel(labels, s, e, ActivityLabel::IdleUnlabeled);
      m.segments.push_back(containing(labels, day.date, s));
      break;
    }
    case UseCase::AbnormalLeaving:
    case UseCase::AbnormalSleeping:
    case UseCase::AbnormalEating: {
      std::vector<ActivitySegment> matching;
      for (const auto& s : segs) {
        if (s.label == target_label) matching.push_back(s);
      }
      if (matching.empty()) {
        throw Error("injection", where(inj) + ": no " + std::string(to_string(target_label)) + " segment");
      }
      const Gaussian& g = ctx.stats->get(target_label, feature);
      if (!g.usable()) {
        throw Error("injection", where(inj) + ": no usable " + std::string(to_string(feature)) + " prior for " +
                                     std::string(to_string(target_label)));
      }
      if (inj.mode == ShiftMode::Duration) {
        const auto* seg = longest(matching, {target_label});
        const int ci_top = static_cast<int>(std::ceil(g.mu + kCiZ * g.sigma));
        const int target = std::min(len, std::max(seg->duration(), ci_top) + inj.margin);
        const auto [s, e] = extend(seg->start_slice, seg->end_slice, target, len, inj);
        relabel(labels, s, e, target_label);
        m.segments.push_back(containing(labels, day.date, s));
      } else {
        const ActivitySegment seg = matching.front();
        const int dur = seg.duration();
        int start = static_cast<int>(std::ceil((g.mu + kCiZ * g.sigma) * 60.0)) + inj.margin;
        if (start + dur > len) {
          start = static_cast<int>(std::floor((g.mu - kCiZ * g.sigma) * 60.0)) - inj.margin;
          if (start < 0) throw Error("injection", where(inj) + ": no start hour outside the interval fits the day");
        }
        // The vacated slot goes to the neighbouring activity.
        ActivityLabel filler = ActivityLabel::IdleUnlabeled;
        for (std::size_t i = 0; i < segs.size(); ++i) {
          if (segs[i] == seg) {
            if (i > 0) filler = segs[i - 1].label;
            else if (i + 1 < segs.size()) filler = segs[i + 1].label;
          }
        }
        relabel(labels, seg.start_slice, seg.end_slice, filler);
        relabel(labels, start, start + dur, target_label);
        m.segments.push_back(containing(labels, day.date, start));
      }
      break;
    }
  }

  apply_labels(day, before, labels, ctx.patterns);
  m.expected_flagged = count_flagged(labels, day.date, feature, ctx);
  m.baseline_flagged = count_flagged(before, day.date, feature, ctx);
  if (manifest) *manifest = std::move(m);
  return out;
}

// ---------------------------------------------------------------------------

void Scenario::validate() const {
  const int bases = (base.household ? 1 : 0) + (base.dataset_dir.empty() ? 0 : 1) + (base.slices_file.empty() ? 0 : 1);
  if (bases != 1) throw Error("invalid_argument", "scenario base needs exactly one of household, dataset, slices");
  if (!(speed >= 1.0)) throw Error("invalid_argument", "scenario speed must be >= 1");
  if (smoothing < 0.0) throw Error("invalid_argument", "smoothing must be >= 0");
  if (n_synth_days < 0) throw Error("invalid_argument", "n_synth_days must be >= 0");
  if (lag < 0) throw Error("invalid_argument", "lag must be >= 0");
  for (const auto& i : injections) i.validate();
  for (int d : replay_days) {
    if (d < 0) throw Error("invalid_argument", "replay day indices must be >= 0");
  }
}

Scenario scenario_from_json(const json& doc, const std::filesystem::path& base_dir) {
  Scenario s;
  try {
    const int version = doc.value("version", 0);
    if (version != kScenarioVersion) {
      throw Error("version", "scenario version " + std::to_string(version) + " is not supported");
    }
    const json& b = doc.at("base");
    if (b.contains("household")) {
      const json& h = b.at("household");
      HouseholdConfig c;
      if (h.contains("start")) c.start = parse_timestamp(h.at("start").get<std::string>() + " 00:00:00");
      c.n_days = h.value("days", c.n_days);
      c.seed = h.value("seed", c.seed);
      c.noise = h.value("noise", c.noise);
      s.base.household = c;
    }
    if (b.contains("dataset")) s.base.dataset_dir = resolve(base_dir, b.at("dataset").get<std::string>());
    if (b.contains("slices")) s.base.slices_file = resolve(base_dir, b.at("slices").get<std::string>());
    if (b.contains("sensor_map")) s.base.sensor_map = resolve(base_dir, b.at("sensor_map").get<std::string>());

    for (const auto& j : doc.value("injections", json::array())) {
      Injection i;
      i.use_case = use_case_from_string(j.at("use_case").get<std::string>());
      i.day = j.at("day").get<int>();
      i.k = j.value("k", i.k);
      i.minutes = j.value("minutes", i.minutes);
      i.margin = j.value("margin", i.margin);
      const std::string mode = j.value("mode", std::string("duration"));
      if (mode == "duration") i.mode = ShiftMode::Duration;
      else if (mode == "start_hour") i.mode = ShiftMode::StartHour;
      else throw Error("invalid_argument", "injection mode must be duration or start_hour");
      if (j.contains("meal")) i.meal = label_from_string(j.at("meal").get<std::string>());
      s.injections.push_back(i);
    }
    if (doc.contains("speed")) {
      const json& sp = doc.at("speed");
      if (sp.is_string()) {
        if (sp.get<std::string>() != "inf") throw Error("invalid_argument", "speed must be a number or \"inf\"");
        s.speed = std::numeric_limits<double>::infinity();
      } else {
        s.speed = sp.get<double>();
      }
    }
    s.seed = doc.value("seed", s.seed);
    s.replay_days = doc.value("replay_days", s.replay_days);
    s.smoothing = doc.value("smoothing", s.smoothing);
    s.n_synth_days = doc.value("n_synth_days", s.n_synth_days);
    s.lag = doc.value("lag", s.lag);
  } catch (const json::exception& e) {
    throw Error("parse", std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

json to_json(const Scenario& s) {
  json base = json::object();
  if (s.base.household) {
    const auto& h = *s.base.household;
    base["household"] = {{"start", format_date(h.start)}, {"days", h.n_days}, {"seed", h.seed}, {"noise", h.noise}};
  }
  if (!s.base.dataset_dir.empty()) base["dataset"] = s.base.dataset_dir.string();
  if (!s.base.slices_file.empty()) base["slices"] = s.base.slices_file.string();
  if (!s.base.sensor_map.empty()) base["sensor_map"] = s.base.sensor_map.string();
  json inj = json::array();
  for (const auto& i : s.injections) {
    inj.push_back({{"use_case", to_string(i.use_case)},
                   {"day", i.day},
                   {"k", i.k},
                   {"minutes", i.minutes},
                   {"margin", i.margin},
                   {"mode", i.mode == ShiftMode::Duration ? "duration" : "start_hour"},
                   {"meal", to_string(i.meal)}});
  }
  return {{"version", kScenarioVersion},
          {"base", base},
          {"injections", inj},
          {"speed", std::isinf(s.speed) ? json("inf") : json(s.speed)},
          {"seed", s.seed},
          {"replay_days", s.replay_days},
          {"smoothing", s.smoothing},
          {"n_synth_days", s.n_synth_days},
          {"lag", s.lag}};
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open scenario '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("parse", "'" + path.string() + "': " + e.what());
  }
  return scenario_from_json(doc, path.parent_path());
}

Recording load_base(const Scenario& scenario) {
  scenario.validate();
  const auto& b = scenario.base;
  if (b.household) return household_recording(*b.household);
  if (!b.dataset_dir.empty()) {
    const SensorMap map = b.sensor_map.empty() ? SensorMap::ordonez_a() : SensorMap::load(b.sensor_map);
    return discretize(load_dataset(b.dataset_dir, map), map.size());
  }
  std::ifstream in(b.slices_file);
  if (!in) throw Error("io", "cannot open '" + b.slices_file.string() + "'");
  return read_slices_jsonl(in);
}

TrainedArtifacts train_artifacts(const Recording& base, const Scenario& scenario) {
  TrainedArtifacts t;
  t.model = train_ml(base, scenario.smoothing);
  t.anomaly = fit_anomaly(base, t.model, scenario.seed, scenario.n_synth_days, TreeConfig{}).artifacts;
  return t;
}

PreparedScenario prepare_scenario(const Scenario& scenario, const Recording& base, const HmmModel& model,
                                  const AnomalyArtifacts& artifacts) {
  scenario.validate();
  PreparedScenario p;
  p.base = base;
  p.injected = base;
  InjectionContext ctx{&artifacts.stats, &model, modal_patterns(base), scenario.seed};
  for (const auto& inj : scenario.injections) {
    ManifestEntry m;
    p.injected = inject(p.injected, inj, ctx, &m);
    p.manifest.push_back(std::move(m));
  }

  std::vector<int> days = scenario.replay_days;
  if (days.empty()) {
    std::set<int> injected;
    for (const auto& inj : scenario.injections) injected.insert(inj.day);
    days.assign(injected.begin(), injected.end());
  }
  if (days.empty()) {
    for (int d = 0; d < static_cast<int>(base.days.size()); ++d) days.push_back(d);
  }
  p.replay.n_sensors = base.n_sensors;
  Timestamp last = std::numeric_limits<Timestamp>::min();
  for (int d : days) {
    if (d < 0 || d >= static_cast<int>(p.injected.days.size())) {
      throw Error("invalid_argument", "replay day " + std::to_string(d) + " is not in the base recording");
    }
    const Day& day = p.injected.days[static_cast<std::size_t>(d)];
    if (day.date <= last) throw Error("invalid_argument", "replay days must be increasing");
    last = day.date;
    p.replay.days.push_back(day);
  }
  return p;
}

json to_json(const ReplayReport& r) {
  json manifest = json::array();
  for (const auto& m : r.manifest) manifest.push_back(to_json(m));
  json out = {{"slices_sent", r.slices_sent},
              {"wall_seconds", r.wall_seconds},
              {"aborted", r.aborted},
              {"manifest", manifest}};
  if (r.aborted) out["error"] = r.error;
  return out;
}

ReplayReport replay(const Recording& recording, const SliceSink& sink, double speed,
                    std::vector<ManifestEntry> manifest) {
  if (!(speed >= 1.0)) throw Error("invalid_argument", "replay speed must be >= 1");
  using clock = std::chrono::steady_clock;
  ReplayReport report;
  report.manifest = std::move(manifest);
  const auto t0 = clock::now();
  const bool paced = std::isfinite(speed);
  const std::chrono::duration<double> step(static_cast<double>(kSliceSeconds) / (paced ? speed : 1.0));
  std::size_t i = 0;
  for (const auto& day : recording.days) {
    for (const auto& slice : day.slices) {
      if (paced) {
        std::this_thread::sleep_until(t0 + std::chrono::duration_cast<clock::duration>(step * static_cast<double>(i)));
      }
      try {
        sink(slice);
      } catch (const std::exception& e) {
        report.aborted = true;
        report.error = e.what();
        report.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
        return report;
      }
      ++report.slices_sent;
      ++i;
    }
  }
  report.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return report;
}

}  // namespace adl
