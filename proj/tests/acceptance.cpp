// Acceptance checks, one line per criterion.
//
//   adlmon_acceptance            run all eight
//   adlmon_acceptance --only N   run one; exit 0 pass, 1 fail, 77 skipped
#include <CLI11.hpp>
#include <boost/math/distributions/normal.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "adl/bus.hpp"
#include "adl/dialogue.hpp"
#include "adl/pipeline.hpp"
#include "adl/simulator.hpp"
#include "support.hpp"

using namespace adl;
using nlohmann::json;

namespace {

enum class Outcome { Pass, Fail, Skip, Report };

struct Result {
  Outcome outcome = Outcome::Fail;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Collects failed sub-checks so a criterion reports all of them at once.
struct Checks {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  Result result(const std::string& summary) const {
    if (failures.empty()) return {Outcome::Pass, summary};
    std::string d = summary + "; failed: ";
    for (std::size_t i = 0; i < failures.size() && i < 5; ++i) d += (i ? " | " : "") + failures[i];
    if (failures.size() > 5) d += " | (" + std::to_string(failures.size() - 5) + " more)";
    return {Outcome::Fail, d};
  }
};

std::filesystem::path ordonez_dir() {
  if (const char* env = std::getenv("ADLMON_ORDONEZ_DIR"); env && *env) return env;
  return std::filesystem::path(ADLMON_SOURCE_DIR) / "data" / "OrdonezA";
}

bool has_ordonez() {
  try {
    find_dataset_files(ordonez_dir());
    return true;
  } catch (const Error&) {
    return false;
  }
}

Recording load_ordonez() {
  const auto dir = ordonez_dir();
  const auto map_file = dir / "sensor_map.json";
  const SensorMap map = std::filesystem::exists(map_file) ? SensorMap::load(map_file) : SensorMap::ordonez_a();
  return discretize(load_dataset(dir, map), map.size());
}

// ---------------------------------------------------------------------------

Result hmm_reproduction() {
  if (!has_ordonez()) {
    return {Outcome::Skip, "OrdonezA files not found in " + ordonez_dir().string() +
                               " (set ADLMON_ORDONEZ_DIR); nothing measured"};
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Recording rec = load_ordonez();
  const EvalReport r = evaluate_lodo(rec, 1.0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Checks c;
  c.expect(rec.days.size() == 21, "expected 21 days, got " + std::to_string(rec.days.size()));
  c.expect(rec.slice_count() == 30240, "expected 30240 slices, got " + std::to_string(rec.slice_count()));
  c.expect(rec.n_sensors == 12, "expected 12 sensors");
  c.expect(std::abs(r.accuracy - 0.85) <= 0.05, "accuracy outside 0.85 +- 0.05");
  c.expect(std::abs(r.f1_macro - 0.62) <= 0.08, "macro F1 outside 0.62 +- 0.08");
  c.expect(secs < 60.0, "runtime over 60 s");
  return c.result("accuracy " + fmt("%.3f", r.accuracy) + ", macro F1 " + fmt("%.3f", r.f1_macro) + ", " +
                  std::to_string(rec.slice_count()) + " slices, " + fmt("%.1f s", secs));
}

Result detector_reproduction() {
  // The public recordings when present, else the generated household.
  const bool real = has_ordonez();
  HouseholdConfig cfg;
  cfg.n_days = 21;
  const Recording rec = real ? load_ordonez() : household_recording(cfg);
  const HmmModel model = train_ml(rec, 1.0);
  const AnomalyFit fit = fit_anomaly(rec, model, 20111128, 30, TreeConfig{});
  const auto report = evaluate_detectors_lodo(fit.rows, fit.labels, TreeConfig{});

  struct Target {
    Feature f;
    double acc, f1;
  };
  const std::array<Target, 4> targets = {Target{Feature::Transition, 0.82, 0.82}, Target{Feature::StartHour, 0.83, 0.79},
                                       Target{Feature::Duration, 0.95, 0.93}, Target{Feature::Frequency, 0.99, 0.99}};
  bool within = true;
  std::string detail = real ? "OrdonezA" : "generated household (OrdonezA not found)";
  detail += " + 30 synthetic days:";
  for (const auto& t : targets) {
    const auto& s = report.scores[index_of(t.f)];
    const bool ok = std::abs(s.accuracy - t.acc) <= 0.07 && std::abs(s.f1_macro - t.f1) <= 0.07;
    within = within && ok;
    detail += " " + std::string(to_string(t.f)) + " " + fmt("%.2f", s.accuracy) + "/" + fmt("%.2f", s.f1_macro) +
              (ok ? "" : "*");
  }
  if (within) return {Outcome::Pass, detail};
  return {Outcome::Report, detail + " (* outside +-0.07; reported, not gating)"};
}

Result decoder_oracle() {
  std::mt19937_64 rng(500);
  double worst = 0.0;
  Checks c;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t S = 1 + rng() % 4;
    const int N = 1 + static_cast<int>(rng() % 3);
    const std::size_t T = 1 + rng() % 8;
    const HmmModel m = test::random_model(rng, S, N);
    const auto xs = test::random_observations(rng, T, N);
    const auto brute = test::brute_force_decode(m, xs);
    const auto dec = decode(m, xs);
    const double path_ll = joint_log_likelihood(m, dec.path, xs);
    const double diff = std::max(std::abs(dec.log_likelihood - brute.best_log), std::abs(path_ll - brute.best_log));
    worst = std::max(worst, diff);
    c.expect(dec.path.size() == T && diff <= 1e-9, "trial " + std::to_string(trial));
  }
  return c.result("500 random HMMs (T<=8, |Y|<=4, N<=3), max |viterbi - exhaustive| = " + fmt("%.2e", worst));
}

Result rule_suite() {
  Checks c;
  HmmModel model;
  {
    std::mt19937_64 rng(4);
    model = test::random_model(rng, kNumLabels, 1);
  }
  const ActivityLabel label = ActivityLabel::Lunch;
  GaussianStats stats;
  for (auto f : {Feature::Duration, Feature::Frequency, Feature::StartHour}) stats.at(label, f) = {10.0, 2.0, 50};

  // Grid sweep against the normal-quantile oracle.
  const double z = boost::math::quantile(boost::math::normal(), 0.95);
  const double lo = 10.0 - z * 2.0, hi = 10.0 + z * 2.0;
  c.expect(std::abs(lo - 6.7102) < 1e-4 && std::abs(hi - 13.2898) < 1e-4, "oracle bounds disagree with [6.7102, 13.2898]");
  std::size_t grid = 0, flagged = 0;
  for (int k = 0; k < 20000; ++k) {
    const double v = k * 0.001 + 0.0005;
    ContextFeatures f;
    f.label = label;
    f.transition_prob = 0.5;
    f.start_hour = v;
    f.duration_min = 10;
    f.frequency_today = 10;
    const bool got = rule_label(f, stats, model).flag(Feature::StartHour);
    const bool fixed = v < 6.7102 || v > 13.2898;
    const bool oracle = v < lo || v > hi;
    c.expect(got == fixed && got == oracle, "grid value " + fmt("%.4f", v));
    ++grid;
    flagged += got;
  }
  for (int v = 0; v <= 20; ++v) {
    ContextFeatures f;
    f.label = label;
    f.transition_prob = 0.5;
    f.duration_min = v;
    f.frequency_today = 10;
    f.start_hour = 10;
    c.expect(rule_label(f, stats, model).flag(Feature::Duration) == (v < 6.7102 || v > 13.2898),
             "integer duration " + std::to_string(v));
  }

  // Transition boundary is strict.
  ContextFeatures t;
  t.label = label;
  t.duration_min = 10;
  t.frequency_today = 10;
  t.start_hour = 10;
  t.transition_prob = 0.05;
  c.expect(!rule_label(t, stats, model).flag(Feature::Transition), "0.05 flagged");
  t.transition_prob = std::nextafter(0.05, 0.0);
  c.expect(rule_label(t, stats, model).flag(Feature::Transition), "just below 0.05 not flagged");
  t.transition_prob = std::nextafter(0.05, 1.0);
  c.expect(!rule_label(t, stats, model).flag(Feature::Transition), "just above 0.05 flagged");

  // Symmetry about the mean and covariance under v -> a v + b.
  std::mt19937_64 rng(10000);
  std::uniform_real_distribution<double> mu_d(-100.0, 100.0), sig_d(0.01, 50.0), r_d(0.0, 3.0), a_d(0.01, 100.0);
  std::size_t cases = 0, skipped = 0;
  while (cases < 10000) {
    const double mu = mu_d(rng), sigma = sig_d(rng), r = r_d(rng), a = a_d(rng), b = mu_d(rng);
    // Offsets within rounding distance of the boundary have no well-defined side.
    if (std::abs(r - kCiZ) < 1e-9) {
      ++skipped;
      continue;
    }
    const double d = r * sigma;
    const Gaussian g{mu, sigma, 10};
    const Gaussian gs{a * mu + b, a * sigma, 10};
    const bool up = outside_ci(g, mu + d), down = outside_ci(g, mu - d);
    c.expect(up == down, "symmetry at case " + std::to_string(cases));
    c.expect(outside_ci(gs, a * (mu + d) + b) == up, "scale covariance at case " + std::to_string(cases));
    c.expect(up == (r > kCiZ), "offset ratio at case " + std::to_string(cases));
    ++cases;
  }

  // Unlimited-depth trees reproduce the rule on their training rows.
  const auto& fit = test::trained_household().fit;
  const auto det = train_detectors(fit.rows, fit.labels, TreeConfig{-1, 1});
  std::string agreement;
  for (auto f : {Feature::Duration, Feature::Frequency}) {
    std::size_t agree = 0;
    for (std::size_t i = 0; i < fit.rows.size(); ++i) agree += det.predict(f, fit.rows[i].features) == fit.labels[i].flag(f);
    const double share = static_cast<double>(agree) / static_cast<double>(fit.rows.size());
    c.expect(share >= 0.99, std::string(to_string(f)) + " tree agreement " + fmt("%.4f", share));
    agreement += " " + std::string(to_string(f)) + " " + fmt("%.4f", share);
  }
  return c.result(std::to_string(grid) + " grid values (" + std::to_string(flagged) +
                  " flagged), transition cut strict at 0.05, 10000 symmetry/scale cases, tree agreement:" +
                  agreement);
}

Result stochastic_invariants() {
  Checks c;
  std::mt19937_64 rng(100);
  double worst = 0.0;
  for (int set = 0; set < 100; ++set) {
    Recording rec;
    rec.n_sensors = 1 + static_cast<int>(rng() % 12);
    const int days = 1 + static_cast<int>(rng() % 5);
    const std::size_t used = 1 + rng() % kNumLabels;
    for (int d = 0; d < days; ++d) {
      Day day{make_timestamp(2011, 11, 28) + d * kSecondsPerDay, {}};
      const int len = 1 + static_cast<int>(rng() % 400);
      ActivityLabel cur = kAllLabels[rng() % used];
      for (int t = 0; t < len; ++t) {
        if (rng() % 10 == 0) cur = kAllLabels[rng() % used];
        Observation x(static_cast<std::size_t>(rec.n_sensors));
        for (auto& v : x) v = rng() % 3 == 0;
        day.slices.push_back({t, day.date + t * 60, x, cur});
      }
      rec.days.push_back(std::move(day));
    }
    const double alpha = std::uniform_real_distribution<double>(1e-3, 5.0)(rng);
    const HmmModel m = train_ml(rec, alpha);
    double s = 0.0;
    for (double p : m.pi) s += p;
    worst = std::max(worst, std::abs(s - 1.0));
    c.expect(std::abs(s - 1.0) <= 1e-9, "pi sum in set " + std::to_string(set));
    for (std::size_t i = 0; i < m.A.size(); ++i) {
      double r = 0.0;
      for (double p : m.A[i]) {
        r += p;
        c.expect(p > 0.0, "non-positive transition in set " + std::to_string(set));
      }
      worst = std::max(worst, std::abs(r - 1.0));
      c.expect(std::abs(r - 1.0) <= 1e-9, "A row " + std::to_string(i) + " in set " + std::to_string(set));
    }
    for (const auto& row : m.B)
      for (double b : row) c.expect(b > 0.0 && b < 1.0, "emission outside (0,1) in set " + std::to_string(set));
  }
  return c.result("100 random training sets, max |row sum - 1| = " + fmt("%.2e", worst));
}

Result dialogue_golden() {
  Checks c;
  const std::string s1 =
      render_activity_event("Mike", ActivityLabel::SpareTimeTV, "living room", make_timestamp(2011, 11, 28, 8, 30));
  c.expect(s1 == "Mike took a rest in the living room at 8:30", "activity sentence: " + s1);

  AnomalyVerdict v;
  v.flags[index_of(Feature::Duration)] = true;
  v.direction[index_of(Feature::Duration)] = 1;
  v.any = true;
  v.expected_next = ActivityLabel::Sleeping;
  ContextFeatures f;
  f.label = ActivityLabel::Leaving;
  f.prev_label = ActivityLabel::SpareTimeTV;
  const std::string s2 = render_abnormal_event("Alice", ActivityLabel::Leaving, v, f);
  c.expect(s2 == "Alice spent much more time in going out. Alice should have slept instead of going out",
           "abnormal sentence: " + s2);

  // Follow-up flow.
  const Timestamp now = make_timestamp(2011, 11, 28, 9, 0);
  DialogueEngine e(IntentSet::defaults(), Phrasebook::defaults(), "Alice");
  e.open_session(Role::Caregiver, "Bob", now);
  e.open_session(Role::OlderAdult, "", now);
  auto r = e.step("s1", UserUtterance{"check if she has a dietary problem"}, now);
  c.expect(!r.messages.empty() && r.messages.back().text == "I will confirm whether she has a dietary problem",
           "store acknowledgement");
  AbnormalContext ctx;
  ctx.activity = ActivityLabel::Toileting;
  ctx.features.label = ActivityLabel::Toileting;
  ctx.verdict.flags[index_of(Feature::Frequency)] = true;
  ctx.verdict.direction[index_of(Feature::Frequency)] = 1;
  ctx.verdict.any = true;
  e.broadcast(AbnormalEvent{ctx}, now);
  const auto br = e.broadcast(ActivityCompletion{ActivityLabel::SpareTimeTV, now, ""}, now);
  std::string prompt;
  for (const auto& step : br)
    for (const auto& m : step.messages)
      if (m.session_id == "s2") prompt = m.text;
  c.expect(prompt == "I found you have an abnormal event of a toilet. I was wondering if you have any dietary problem?",
           "prompt: " + prompt);

  // Fuzzing.
  std::mt19937_64 rng(100000);
  DialogueEngine fz(IntentSet::defaults(), Phrasebook::defaults(), "Alice");
  const std::vector<std::string> said = {"hello", "what happened", "why abnormal", "check if she has a dietary problem",
                                         "ask whether she slept well", "yes", "no", "rather not share", "zebra", "",
                                         "hello yes", "check if"};
  std::vector<std::string> ids;
  std::set<std::string> secrets;
  std::size_t declines = 0;
  for (int i = 0; i < 100000; ++i) {
    const Timestamp t = now + i;
    const auto k = rng() % 10;
    if (ids.size() < 2 || (k == 0 && ids.size() < 6)) {
      ids.push_back(fz.open_session(rng() % 2 ? Role::Caregiver : Role::OlderAdult, "", t).session_id);
      continue;
    }
    if (k < 6) {
      const auto& id = ids[rng() % ids.size()];
      const std::string base = said[rng() % said.size()];
      const std::string secret = "secret" + std::to_string(i);
      const bool pending = fz.session(id).active_request.has_value();
      fz.step(id, UserUtterance{base + " " + secret}, t);
      if (base == "rather not share" && pending) {
        secrets.insert(secret);
        ++declines;
      }
    } else if (k < 8) {
      AbnormalContext a;
      a.activity = kAllLabels[rng() % kNumLabels];
      a.features.label = a.activity;
      const auto ft = kFeatures[rng() % 4];
      a.verdict.flags[index_of(ft)] = true;
      a.verdict.direction[index_of(ft)] = rng() % 2 ? 1 : -1;
      a.verdict.any = true;
      fz.broadcast(AbnormalEvent{a}, t);
    } else {
      fz.broadcast(ActivityCompletion{kAllLabels[rng() % kNumLabels], t, ""}, t);
    }
    for (const auto& id : ids) {
      const auto st = fz.session(id).state;
      if (std::find(kDialogueStates.begin(), kDialogueStates.end(), st) == kDialogueStates.end()) {
        c.expect(false, "undeclared state after event " + std::to_string(i));
      }
    }
  }
  std::size_t leaks = 0;
  for (const auto& id : ids) {
    if (fz.session(id).role != Role::Caregiver) continue;
    for (const auto& m : fz.session(id).transcript) {
      for (auto at = m.text.find("secret"); at != std::string::npos; at = m.text.find("secret", at + 1)) {
        const auto end = m.text.find_first_not_of("0123456789", at + 6);
        leaks += secrets.count(m.text.substr(at, end - at));
      }
    }
  }
  c.expect(declines > 0, "fuzzing produced no declines");
  c.expect(leaks == 0, std::to_string(leaks) + " declined answers reached a caregiver");
  return c.result("golden sentences and follow-up prompt exact; 100000 fuzzed events, " + std::to_string(declines) +
                  " declines, 0 leaks");
}

struct ScenarioRun {
  std::string log_bytes;
  std::vector<BusEvent> events;
  std::vector<ManifestEntry> manifest;
  HmmModel model;
  AnomalyArtifacts artifacts;
};

ScenarioRun run_frequent_toilet(const std::filesystem::path& dir) {
  Scenario s;
  s.base.household = HouseholdConfig{};
  s.base.household->n_days = 14;
  s.injections = {Injection{UseCase::FrequentToilet, 10, 4}};
  s.seed = 7;
  const Recording base = load_base(s);
  const TrainedArtifacts trained = train_artifacts(base, s);
  const PreparedScenario prepared = prepare_scenario(s, base, trained.model, trained.anomaly);

  ScenarioRun out;
  {
    EventBus bus(dir);
    DialogueEngine engine(IntentSet::defaults(), Phrasebook::defaults(), "Alice");
    Pipeline pipeline(trained.model, trained.anomaly, bus, PipelineConfig{s.lag, VerdictSource::Rule}, &engine);
    pipeline.open_session(Role::Caregiver, "Bob");
    pipeline.open_session(Role::OlderAdult, "");
    pipeline.converse("s1", "check if she has a dietary problem");
    const auto report = replay(prepared.replay, [&](const TimeSlice& sl) { pipeline.push(sl); }, s.speed,
                               prepared.manifest);
    if (report.aborted) throw Error("replay", report.error);
    pipeline.finish();
    out.events = bus.all();
  }
  std::ifstream in(dir / "events.log", std::ios::binary);
  out.log_bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  out.manifest = prepared.manifest;
  out.model = trained.model;
  out.artifacts = trained.anomaly;
  return out;
}

Result end_to_end_determinism() {
  Checks c;
  test::TempDir dir;
  const ScenarioRun a = run_frequent_toilet(dir / "run1");
  const ScenarioRun b = run_frequent_toilet(dir / "run2");
  c.expect(!a.log_bytes.empty() && a.log_bytes == b.log_bytes, "event logs differ");

  // Decoded segments from activity_recognized, then the offline rule.
  std::map<Timestamp, std::vector<ActivityLabel>> paths;
  std::set<std::tuple<std::string, int, int, std::string, json>> pipeline_set, oracle_set;
  for (const auto& e : a.events) {
    if (e.topic == Topic::ActivityRecognized) {
      paths[parse_timestamp(e.payload["day"].get<std::string>() + " 00:00:00")].push_back(
          label_from_string(e.payload["activity"].get<std::string>()));
    } else if (e.topic == Topic::AbnormalDetected) {
      pipeline_set.emplace(e.payload["day"].get<std::string>(), e.payload["start_slice"].get<int>(),
                           e.payload["end_slice"].get<int>(), e.payload["activity"].get<std::string>(),
                           e.payload["flags"]);
    }
  }
  std::vector<ActivitySegment> segs;
  for (const auto& [day, path] : paths) {
    const auto d = segment_day(path, day);
    segs.insert(segs.end(), d.begin(), d.end());
  }
  bool toilet_frequency = false;
  for (const auto& row : featurize(segs, a.model)) {
    const auto v = rule_label(row.features, a.artifacts.stats, a.model);
    if (!v.any) continue;
    json flags = json::array();
    for (auto f : kFeatures)
      if (v.flag(f)) flags.push_back(std::string(to_string(f)));
    oracle_set.emplace(format_date(row.segment.day), row.segment.start_slice, row.segment.end_slice,
                       std::string(to_string(row.features.label)), flags);
    toilet_frequency = toilet_frequency ||
                       (row.features.label == ActivityLabel::Toileting && v.flag(Feature::Frequency));
  }
  c.expect(pipeline_set == oracle_set, "abnormal_detected differs from the offline rule (" +
                                           std::to_string(pipeline_set.size()) + " vs " +
                                           std::to_string(oracle_set.size()) + ")");
  c.expect(!a.manifest.empty() && a.manifest[0].expected_flagged > 0, "injection flags nothing on ground truth");
  c.expect(toilet_frequency, "no Toileting frequency anomaly was decoded");
  return c.result(std::to_string(a.log_bytes.size()) + "-byte logs identical across two runs; " +
                  std::to_string(pipeline_set.size()) + " abnormal_detected events equal the offline rule");
}

json random_payload(Topic t, std::mt19937_64& rng, int i) {
  const std::string n = std::to_string(i);
  switch (t) {
    case Topic::DialogueMessage:
      return {{"speaker", "system"}, {"text", "m" + n}, {"timestamp", "2011-11-28 00:00:00"}, {"session_id", "s1"}};
    case Topic::RequestAnswered:
      return {{"id", i}, {"status", rng() % 2 ? "answered" : "declined"}};
    case Topic::RequestStored:
      return {{"id", i}, {"target_user", "Alice"}, {"question_text", "q" + n},
              {"created_at", "2011-11-28 00:00:00"}, {"status", "stored"}};
    default:
      return {{"activity", "Toileting"}, {"flags", {"frequency"}}, {"wallclock", "2011-11-28 00:00:00"},
              {"severity", 1 + static_cast<int>(rng() % 4)}, {"style", "highlight"}, {"abnormal_seq", i}};
  }
}

Result pubsub_contract() {
  Checks c;
  test::TempDir dir;
  const std::array<Topic, 4> topics = {Topic::DialogueMessage, Topic::RequestAnswered, Topic::RequestStored,
                                       Topic::Notification};
  const int n = 10000;
  std::array<std::vector<BusEvent>, 4> live;
  {
    EventBus bus(dir / "log");
    std::vector<std::thread> readers;
    std::array<std::size_t, 4> expected{};
    std::mt19937_64 plan(8);
    for (int i = 0; i < n; ++i) ++expected[plan() % 4];
    for (std::size_t k = 0; k < topics.size(); ++k) {
      readers.emplace_back([&, k] {
        auto sub = bus.subscribe(topics[k]);
        while (live[k].size() < expected[k]) {
          auto e = sub.next(std::chrono::seconds(10));
          if (!e) break;
          live[k].push_back(std::move(*e));
        }
      });
    }
    std::mt19937_64 rng(8);
    std::mt19937_64 payloads(9);
    for (int i = 0; i < n; ++i) {
      const Topic t = topics[rng() % 4];
      bus.publish(t, random_payload(t, payloads, i), i);
    }
    for (auto& r : readers) r.join();
    std::size_t delivered = 0;
    for (std::size_t k = 0; k < topics.size(); ++k) {
      const auto replayed = bus.subscribe(topics[k], 0).poll(SIZE_MAX);
      c.expect(replayed == live[k], "in-memory replay differs for " + std::string(to_string(topics[k])));
      delivered += live[k].size();
    }
    c.expect(delivered == static_cast<std::size_t>(n), "live delivery lost events");
  }
  // Reopened from disk, the log replays the same events.
  const auto path = dir / "log" / "events.log";
  {
    EventBus reopened(dir / "log");
    for (std::size_t k = 0; k < topics.size(); ++k) {
      c.expect(reopened.subscribe(topics[k], 0).poll(SIZE_MAX) == live[k],
               "persistent replay differs for " + std::string(to_string(topics[k])));
    }
  }
  const auto all = replay_log(path).events;
  const auto bounds = record_boundaries(path);
  c.expect(bounds.size() == all.size() + 1, "boundary count");

  // Truncation at every boundary of a 2000-record prefix, and at a sample across the full log.
  auto check_cut = [&](std::size_t i, bool reopen) {
    const auto cut = dir / ("cut" + std::to_string(i));
    std::filesystem::create_directories(cut);
    std::filesystem::copy_file(path, cut / "events.log", std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(cut / "events.log", bounds[i]);
    const auto r = replay_log(cut / "events.log");
    const bool prefix = !r.truncated_tail && r.events.size() == i && std::equal(r.events.begin(), r.events.end(), all.begin());
    c.expect(prefix, "cut at boundary " + std::to_string(i));
    if (reopen) {
      EventBus bus(cut);
      c.expect(bus.size() == i, "reopen after cut " + std::to_string(i));
    }
    std::filesystem::remove_all(cut);
  };
  {
    const auto small = dir / "small";
    std::filesystem::create_directories(small);
    {
      EventBus bus(small);
      for (std::size_t i = 0; i < 2000; ++i) bus.publish(all[i].topic, all[i].payload, all[i].ts);
    }
    const auto sp = small / "events.log";
    const auto sb = record_boundaries(sp);
    std::ifstream in(sp, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    for (std::size_t i = 0; i < sb.size(); ++i) {
      const auto cut = dir / "cut_small.log";
      std::ofstream(cut, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(sb[i]));
      const auto r = replay_log(cut);
      c.expect(!r.truncated_tail && r.events.size() == i &&
                   std::equal(r.events.begin(), r.events.end(), all.begin()),
               "small log cut at boundary " + std::to_string(i));
    }
  }
  std::mt19937_64 pick(88);
  for (int s = 0; s < 100; ++s) check_cut(pick() % bounds.size(), s % 10 == 0);
  check_cut(0, true);
  check_cut(bounds.size() - 1, true);

  return c.result("10000 events over 4 topics: live == replay-from-0 (memory and disk); 2001 boundary cuts of a "
                  "2000-record log and 102 sampled cuts of the full log replay valid prefixes");
}

struct Criterion {
  int id;
  const char* name;
  std::function<Result()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "HMM reproduction", hmm_reproduction},
      {2, "anomaly-detector reproduction", detector_reproduction},
      {3, "decoder oracle", decoder_oracle},
      {4, "rule-label suite", rule_suite},
      {5, "stochastic-matrix invariants", stochastic_invariants},
      {6, "dialogue golden strings", dialogue_golden},
      {7, "end-to-end determinism", end_to_end_determinism},
      {8, "pub-sub contract", pubsub_contract},
  };
  return all;
}

const char* tag(Outcome o) {
  switch (o) {
    case Outcome::Pass: return "PASS";
    case Outcome::Fail: return "FAIL";
    case Outcome::Skip: return "SKIP";
    case Outcome::Report: return "REPORT";
  }
  return "?";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  bool failed = false;
  bool skipped = false;
  for (const auto& c : criteria()) {
    if (only && c.id != only) continue;
    Result r;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %d %s: %s (%.1f s)\n", tag(r.outcome), c.id, c.name, r.detail.c_str(), secs);
    std::fflush(stdout);
    failed = failed || r.outcome == Outcome::Fail;
    skipped = skipped || r.outcome == Outcome::Skip;
  }
  if (failed) return 1;
  if (only && skipped) return 77;
  return 0;
}
