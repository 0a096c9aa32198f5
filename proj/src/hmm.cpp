#include "adl/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <numeric>

namespace adl {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

struct LogTables {
  std::vector<double> log_pi;
  std::vector<std::vector<double>> log_a;
  std::vector<std::vector<double>> log_on;
  std::vector<std::vector<double>> log_off;
};

LogTables log_tables(const HmmModel& m) {
  LogTables t;
  const std::size_t s = m.n_states();
  t.log_pi.resize(s);
  t.log_a.assign(s, std::vector<double>(s));
  t.log_on.assign(s, std::vector<double>(m.n_sensors));
  t.log_off.assign(s, std::vector<double>(m.n_sensors));
  for (std::size_t i = 0; i < s; ++i) {
    t.log_pi[i] = safe_log(m.pi[i]);
    for (std::size_t j = 0; j < s; ++j) t.log_a[i][j] = safe_log(m.A[i][j]);
    for (int k = 0; k < m.n_sensors; ++k) {
      t.log_on[i][k] = safe_log(m.B[i][k]);
      t.log_off[i][k] = safe_log(1.0 - m.B[i][k]);
    }
  }
  return t;
}

void emission_into(const LogTables& t, std::span<const std::uint8_t> x, std::vector<double>& out) {
  out.resize(t.log_pi.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] ? t.log_on[i][k] : t.log_off[i][k];
    out[i] = acc;
  }
}

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Viterbi over precomputed emissions. Returns state indices.
std::pair<std::vector<std::size_t>, double> viterbi(const LogTables& t,
                                                   const std::vector<std::vector<double>>& em) {
  const std::size_t n = em.size();
  const std::size_t s = t.log_pi.size();
  std::vector<double> delta(s);
  std::vector<double> next(s);
  std::vector<std::vector<std::uint8_t>> back(n, std::vector<std::uint8_t>(s, 0));
  for (std::size_t i = 0; i < s; ++i) delta[i] = t.log_pi[i] + em[0][i];
  for (std::size_t step = 1; step < n; ++step) {
    for (std::size_t j = 0; j < s; ++j) {
      std::size_t arg = 0;
      double best = delta[0] + t.log_a[0][j];
      for (std::size_t i = 1; i < s; ++i) {
        const double cand = delta[i] + t.log_a[i][j];
        if (cand > best) {
          best = cand;
          arg = i;
        }
      }
      next[j] = best + em[step][j];
      back[step][j] = static_cast<std::uint8_t>(arg);
    }
    std::swap(delta, next);
  }
  std::vector<std::size_t> path(n);
  path[n - 1] = argmax_first(delta);
  const double score = delta[path[n - 1]];
  for (std::size_t step = n - 1; step > 0; --step) path[step - 1] = back[step][path[step]];
  return {std::move(path), score};
}

void check_observation(const HmmModel& m, std::size_t size) {
  if (static_cast<int>(size) != m.n_sensors) {
    throw Error("invalid_argument", "observation has " + std::to_string(size) +
                                        " sensors, model expects " + std::to_string(m.n_sensors));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// HmmModel
// ---------------------------------------------------------------------------

std::optional<std::size_t> HmmModel::state_index(ActivityLabel label) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == label) return i;
  }
  return std::nullopt;
}

std::size_t HmmModel::require_state(ActivityLabel label) const {
  auto idx = state_index(label);
  if (!idx) throw Error("invalid_argument", "label " + std::string(to_string(label)) + " not in model");
  return *idx;
}

void HmmModel::validate() const {
  const std::size_t s = states.size();
  if (s == 0 || s > 255) throw Error("invariant", "model must have 1..255 states");
  if (pi.size() != s || A.size() != s || B.size() != s) {
    throw Error("invariant", "model parameter shapes disagree with state count");
  }
  auto check_row = [](const std::vector<double>& row, const char* what) {
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error("invariant", std::string(what) + " entry outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error("invariant", std::string(what) + " does not sum to 1");
  };
  check_row(pi, "pi");
  for (const auto& row : A) {
    if (row.size() != s) throw Error("invariant", "A is not square");
    check_row(row, "A row");
  }
  for (const auto& row : B) {
    if (static_cast<int>(row.size()) != n_sensors) throw Error("invariant", "B row length mismatch");
    for (double p : row) {
      if (!(p > 0.0 && p < 1.0)) throw Error("invariant", "B entry outside (0,1)");
    }
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

HmmCounts::HmmCounts(std::size_t states, int sensors)
    : n_states(states),
      n_sensors(sensors),
      initial(states, 0.0),
      transition(states, std::vector<double>(states, 0.0)),
      occupancy(states, 0.0),
      on(states, std::vector<double>(sensors, 0.0)) {}

HmmCounts& HmmCounts::operator+=(const HmmCounts& o) {
  for (std::size_t i = 0; i < n_states; ++i) {
    initial[i] += o.initial[i];
    occupancy[i] += o.occupancy[i];
    for (std::size_t j = 0; j < n_states; ++j) transition[i][j] += o.transition[i][j];
    for (int k = 0; k < n_sensors; ++k) on[i][k] += o.on[i][k];
  }
  return *this;
}

HmmCounts& HmmCounts::operator-=(const HmmCounts& o) {
  for (std::size_t i = 0; i < n_states; ++i) {
    initial[i] -= o.initial[i];
    occupancy[i] -= o.occupancy[i];
    for (std::size_t j = 0; j < n_states; ++j) transition[i][j] -= o.transition[i][j];
    for (int k = 0; k < n_sensors; ++k) on[i][k] -= o.on[i][k];
  }
  return *this;
}

std::vector<ActivityLabel> default_states() {
  return std::vector<ActivityLabel>(kAllLabels.begin(), kAllLabels.end());
}

HmmCounts count_day(const Day& day, const std::vector<ActivityLabel>& states, int n_sensors) {
  HmmCounts c(states.size(), n_sensors);
  std::array<int, kNumLabels> lookup;
  lookup.fill(-1);
  for (std::size_t i = 0; i < states.size(); ++i) lookup[index_of(states[i])] = static_cast<int>(i);

  int prev = -1;
  for (const auto& s : day.slices) {
    if (!s.y) {
      throw Error("invalid_argument", "slice " + std::to_string(s.t) + " of " +
                                          format_date(day.date) + " has no label");
    }
    const int cur = lookup[index_of(*s.y)];
    if (cur < 0) {
      throw Error("invalid_argument",
                  "label " + std::string(to_string(*s.y)) + " is not a model state");
    }
    if (static_cast<int>(s.x.size()) != n_sensors) {
      throw Error("invalid_argument", "slice sensor vector length mismatch");
    }
    if (prev < 0) {
      c.initial[cur] += 1.0;
    } else {
      c.transition[prev][cur] += 1.0;
    }
    c.occupancy[cur] += 1.0;
    for (int k = 0; k < n_sensors; ++k) {
      if (s.x[k]) c.on[cur][k] += 1.0;
    }
    prev = cur;
  }
  return c;
}

HmmModel estimate(const HmmCounts& counts, const std::vector<ActivityLabel>& states,
                  double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error("invalid_argument", "smoothing must be a finite value >= 0");
  }
  const std::size_t s = states.size();
  double days = 0.0;
  for (double v : counts.initial) days += v;
  if (days <= 0.0) throw Error("invalid_argument", "cannot train on an empty recording");

  auto zero_count = [&](const std::string& what) {
    throw Error("invalid_argument",
                "smoothing 0 with a zero count (" + what + "); use smoothing > 0");
  };

  HmmModel m;
  m.states = states;
  m.n_sensors = counts.n_sensors;
  m.smoothing = alpha;
  m.pi.resize(s);
  m.A.assign(s, std::vector<double>(s));
  m.B.assign(s, std::vector<double>(counts.n_sensors));
  const double sd = static_cast<double>(s);

  for (std::size_t i = 0; i < s; ++i) {
    if (alpha == 0.0 && counts.initial[i] == 0.0) zero_count("initial " + std::string(to_string(states[i])));
    m.pi[i] = (counts.initial[i] + alpha) / (days + alpha * sd);

    double row = 0.0;
    for (std::size_t j = 0; j < s; ++j) row += counts.transition[i][j];
    for (std::size_t j = 0; j < s; ++j) {
      if (alpha == 0.0 && counts.transition[i][j] == 0.0) {
        zero_count("transition " + std::string(to_string(states[i])) + "->" +
                   std::string(to_string(states[j])));
      }
      m.A[i][j] = (counts.transition[i][j] + alpha) / (row + alpha * sd);
    }

    const double occ = counts.occupancy[i];
    for (int k = 0; k < counts.n_sensors; ++k) {
      const double on = counts.on[i][k];
      if (alpha == 0.0 && (on == 0.0 || on == occ)) {
        zero_count("emission " + std::string(to_string(states[i])) + " sensor " + std::to_string(k));
      }
      m.B[i][k] = (on + alpha) / (occ + 2.0 * alpha);
    }
  }
  m.validate();
  return m;
}

std::string fingerprint(const Recording& recording) {
  // FNV-1a over slice contents.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(recording.n_sensors));
  for (const auto& d : recording.days) {
    mix(static_cast<std::uint64_t>(d.date));
    for (const auto& s : d.slices) {
      std::uint64_t bits = 0;
      for (std::size_t k = 0; k < s.x.size(); ++k) bits |= static_cast<std::uint64_t>(s.x[k] & 1u) << k;
      mix(bits);
      mix(s.y ? index_of(*s.y) + 1 : 0);
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

HmmModel train_ml(const Recording& recording, double smoothing,
                  const std::vector<ActivityLabel>& states) {
  if (recording.days.empty() || recording.slice_count() == 0) {
    throw Error("invalid_argument", "cannot train on an empty recording");
  }
  HmmCounts total(states.size(), recording.n_sensors);
  for (const auto& d : recording.days) {
    if (d.slices.empty()) continue;
    total += count_day(d, states, recording.n_sensors);
  }
  HmmModel m = estimate(total, states, smoothing);
  m.fingerprint = fingerprint(recording);
  return m;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

std::vector<double> emission_log_probs(const HmmModel& model, std::span<const std::uint8_t> x) {
  check_observation(model, x.size());
  std::vector<double> out(model.n_states());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      acc += x[k] ? std::log(model.B[i][k]) : std::log(1.0 - model.B[i][k]);
    }
    out[i] = acc;
  }
  return out;
}

DecodeResult decode(const HmmModel& model, const std::vector<Observation>& observations) {
  if (observations.empty()) throw Error("invalid_argument", "cannot decode an empty slice list");
  const LogTables t = log_tables(model);
  std::vector<std::vector<double>> em(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    check_observation(model, observations[i].size());
    emission_into(t, observations[i], em[i]);
  }
  auto [idx, score] = viterbi(t, em);
  DecodeResult r;
  r.path.reserve(idx.size());
  for (auto i : idx) r.path.push_back(model.states[i]);
  r.log_likelihood = score;
  return r;
}

DecodeResult decode(const HmmModel& model, std::span<const TimeSlice> slices) {
  if (slices.empty()) throw Error("invalid_argument", "cannot decode an empty slice list");
  const LogTables t = log_tables(model);
  std::vector<std::vector<double>> em(slices.size());
  for (std::size_t i = 0; i < slices.size(); ++i) {
    check_observation(model, slices[i].x.size());
    emission_into(t, slices[i].x, em[i]);
  }
  auto [idx, score] = viterbi(t, em);
  DecodeResult r;
  r.path.reserve(idx.size());
  for (auto i : idx) r.path.push_back(model.states[i]);
  r.log_likelihood = score;
  return r;
}

double joint_log_likelihood(const HmmModel& model, const std::vector<ActivityLabel>& path,
                            const std::vector<Observation>& observations) {
  if (path.size() != observations.size() || path.empty()) {
    throw Error("invalid_argument", "path and observations must be non-empty and equally long");
  }
  double ll = 0.0;
  std::size_t prev = 0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    const std::size_t cur = model.require_state(path[t]);
    ll += t == 0 ? safe_log(model.pi[cur]) : safe_log(model.A[prev][cur]);
    ll += emission_log_probs(model, observations[t])[cur];
    prev = cur;
  }
  return ll;
}

FixedLagDecoder::FixedLagDecoder(const HmmModel& model, int lag) : model_(&model), lag_(lag) {
  if (lag < 0) throw Error("invalid_argument", "decoder lag must be >= 0");
  const LogTables t = log_tables(model);
  log_pi_ = t.log_pi;
  log_a_ = t.log_a;
}

std::size_t FixedLagDecoder::backtrack_from(std::size_t state, int from, int to) const {
  for (int step = from; step > to; --step) state = back_[step][state];
  return state;
}

std::vector<std::pair<int, ActivityLabel>> FixedLagDecoder::push(std::span<const std::uint8_t> x) {
  const auto em = emission_log_probs(*model_, x);
  const std::size_t s = model_->n_states();
  std::vector<std::uint8_t> back(s, 0);
  if (t_ == 0) {
    delta_.resize(s);
    for (std::size_t i = 0; i < s; ++i) delta_[i] = log_pi_[i] + em[i];
  } else {
    std::vector<double> next(s);
    for (std::size_t j = 0; j < s; ++j) {
      std::size_t arg = 0;
      double best = delta_[0] + log_a_[0][j];
      for (std::size_t i = 1; i < s; ++i) {
        const double cand = delta_[i] + log_a_[i][j];
        if (cand > best) {
          best = cand;
          arg = i;
        }
      }
      next[j] = best + em[j];
      back[j] = static_cast<std::uint8_t>(arg);
    }
    delta_ = std::move(next);
  }
  back_.push_back(std::move(back));
  ++t_;

  std::vector<std::pair<int, ActivityLabel>> out;
  const int now = t_ - 1;
  if (now - lag_ >= next_commit_) {
    const std::size_t state = backtrack_from(argmax_first(delta_), now, next_commit_);
    out.emplace_back(next_commit_, model_->states[state]);
    ++next_commit_;
  }
  return out;
}

std::vector<std::pair<int, ActivityLabel>> FixedLagDecoder::flush() {
  std::vector<std::pair<int, ActivityLabel>> out;
  if (t_ > 0) {
    std::size_t state = argmax_first(delta_);
    std::vector<std::size_t> tail(static_cast<std::size_t>(t_ - next_commit_));
    for (int step = t_ - 1; step >= next_commit_; --step) {
      tail[static_cast<std::size_t>(step - next_commit_)] = state;
      if (step > 0) state = back_[step][state];
    }
    for (std::size_t i = 0; i < tail.size(); ++i) {
      out.emplace_back(next_commit_ + static_cast<int>(i), model_->states[tail[i]]);
    }
  }
  delta_.clear();
  back_.clear();
  t_ = 0;
  next_commit_ = 0;
  return out;
}

// ---------------------------------------------------------------------------
// Leave-one-day-out evaluation
// ---------------------------------------------------------------------------

EvalReport evaluate_lodo(const Recording& recording, double smoothing) {
  std::vector<std::size_t> days;
  for (std::size_t d = 0; d < recording.days.size(); ++d) {
    if (!recording.days[d].slices.empty()) days.push_back(d);
  }
  if (days.size() < 2) throw Error("invalid_argument", "leave-one-day-out needs at least 2 days");

  const auto states = default_states();
  std::vector<HmmCounts> per_day;
  per_day.reserve(days.size());
  HmmCounts total(states.size(), recording.n_sensors);
  for (auto d : days) {
    per_day.push_back(count_day(recording.days[d], states, recording.n_sensors));
    total += per_day.back();
  }

  auto run_fold = [&](std::size_t f) {
    HmmCounts train = total;
    train -= per_day[f];
    const HmmModel model = estimate(train, states, smoothing);
    const Day& day = recording.days[days[f]];
    const DecodeResult r = decode(model, std::span<const TimeSlice>(day.slices));
    Confusion c(kNumLabels);
    for (std::size_t t = 0; t < day.slices.size(); ++t) {
      c.add(index_of(*day.slices[t].y), index_of(r.path[t]));
    }
    return c;
  };

  std::vector<std::future<Confusion>> futures;
  futures.reserve(days.size());
  for (std::size_t f = 0; f < days.size(); ++f) {
    futures.push_back(std::async(std::launch::async, run_fold, f));
  }

  EvalReport report;
  report.confusion = Confusion(kNumLabels);
  for (std::size_t f = 0; f < days.size(); ++f) {
    const Confusion c = futures[f].get();
    report.confusion.merge(c);
    FoldReport fr;
    fr.day = recording.days[days[f]].date;
    fr.slices = c.total();
    fr.correct = c.trace();
    fr.accuracy = c.accuracy();
    report.folds.push_back(fr);
  }
  report.accuracy = report.confusion.accuracy();
  report.f1_macro = report.confusion.macro_f1();
  for (auto label : kAllLabels) {
    const auto c = index_of(label);
    if (report.confusion.support(c) + report.confusion.predicted(c) > 0) {
      report.per_class_f1[label] = report.confusion.f1(c);
    }
  }
  return report;
}

}  // namespace adl
