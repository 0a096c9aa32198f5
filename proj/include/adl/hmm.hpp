// include/adl/hmm.hpp
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adl/ingest.hpp"
#include "adl/metrics.hpp"
#include "adl/types.hpp"

namespace adl {

using Observation = std::vector<std::uint8_t>;

// Activity HMM with independent Bernoulli emissions per sensor.
//   pi[i]   = p(y_1 = i)
//   A[i][j] = p(y_t = j | y_{t-1} = i)
//   B[i][k] = p(x^k = 1 | y = i)
struct HmmModel {
  std::vector<ActivityLabel> states;
  int n_sensors = 0;
  std::vector<double> pi;
  std::vector<std::vector<double>> A;
  std::vector<std::vector<double>> B;
  double smoothing = 1.0;
  std::string fingerprint;  // of the training data

  std::size_t n_states() const { return states.size(); }
  std::optional<std::size_t> state_index(ActivityLabel label) const;
  std::size_t require_state(ActivityLabel label) const;

  // Row sums within 1e-9, B strictly inside (0,1). Throws Error{"invariant"}.
  void validate() const;

  bool operator==(const HmmModel&) const = default;
};

struct DecodeResult {
  std::vector<ActivityLabel> path;
  double log_likelihood = 0.0;  // joint log p(path, x)
};

// Sufficient statistics for maximum-likelihood estimation. Counts are kept
// per day so leave-one-day-out folds can subtract a day instead of recounting.
struct HmmCounts {
  std::size_t n_states = 0;
  int n_sensors = 0;
  std::vector<double> initial;                 // day-initial label counts
  std::vector<std::vector<double>> transition;  // [from][to], within-day
  std::vector<double> occupancy;               // slices per label
  std::vector<std::vector<double>> on;         // [label][sensor] active slices

  HmmCounts() = default;
  HmmCounts(std::size_t states, int sensors);
  HmmCounts& operator+=(const HmmCounts& other);
  HmmCounts& operator-=(const HmmCounts& other);
};

std::vector<ActivityLabel> default_states();

HmmCounts count_day(const Day& day, const std::vector<ActivityLabel>& states, int n_sensors);

// Additive smoothing alpha on every count. alpha == 0 is accepted only when
// no count the estimate divides by or lands on is zero.
HmmModel estimate(const HmmCounts& counts, const std::vector<ActivityLabel>& states,
                  double alpha);

HmmModel train_ml(const Recording& recording, double smoothing,
                  const std::vector<ActivityLabel>& states = default_states());

std::string fingerprint(const Recording& recording);

// log p(x | state) for every state.
std::vector<double> emission_log_probs(const HmmModel& model, std::span<const std::uint8_t> x);

// Log-space Viterbi; ties go to the lowest state index.
DecodeResult decode(const HmmModel& model, std::span<const TimeSlice> slices);
DecodeResult decode(const HmmModel& model, const std::vector<Observation>& observations);

double joint_log_likelihood(const HmmModel& model, const std::vector<ActivityLabel>& path,
                            const std::vector<Observation>& observations);

// Streaming Viterbi that commits the label of slice t - lag once slice t is
// seen. flush() commits what is left by a full backtrack and resets for the
// next day. A lag of at least the day length reproduces offline decode().
class FixedLagDecoder {
 public:
  FixedLagDecoder(const HmmModel& model, int lag);

  // (slice index, label) pairs newly committed.
  std::vector<std::pair<int, ActivityLabel>> push(std::span<const std::uint8_t> x);
  std::vector<std::pair<int, ActivityLabel>> flush();
  int pending() const { return t_ - next_commit_; }

 private:
  std::size_t backtrack_from(std::size_t state, int from, int to) const;

  const HmmModel* model_;
  int lag_;
  std::vector<double> log_pi_;
  std::vector<std::vector<double>> log_a_;
  std::vector<double> delta_;
  std::vector<std::vector<std::uint8_t>> back_;  // back_[t][j]: best predecessor
  int t_ = 0;
  int next_commit_ = 0;
};

struct FoldReport {
  Timestamp day = 0;
  std::size_t slices = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;
  double f1_macro = 0.0;
  std::map<ActivityLabel, double> per_class_f1;
  Confusion confusion;
  std::vector<FoldReport> folds;
};

// Train on every day but one, decode the held-out day, pool all folds.
EvalReport evaluate_lodo(const Recording& recording, double smoothing);

}  // namespace adl
