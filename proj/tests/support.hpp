// Shared fixtures for the test binaries.
#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "adl/artifacts.hpp"
#include "adl/hmm.hpp"
#include "adl/household.hpp"

namespace adl::test {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "adlmon") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline const Recording& household(int days = 14) {
  static std::map<int, Recording> cache;
  auto it = cache.find(days);
  if (it == cache.end()) {
    HouseholdConfig cfg;
    cfg.n_days = days;
    it = cache.emplace(days, household_recording(cfg)).first;
  }
  return it->second;
}

struct Trained {
  HmmModel model;
  AnomalyFit fit;
};

inline const Trained& trained_household() {
  static const Trained t = [] {
    Trained out;
    out.model = train_ml(household(), 1.0);
    out.fit = fit_anomaly(household(), out.model, 11, 30, TreeConfig{});
    return out;
  }();
  return t;
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) {
    x = g(rng) + 1e-6;
    s += x;
  }
  for (auto& x : v) x /= s;
  return v;
}

// A valid model with random parameters over the first n_states labels.
inline HmmModel random_model(std::mt19937_64& rng, std::size_t n_states, int n_sensors) {
  HmmModel m;
  for (std::size_t i = 0; i < n_states; ++i) m.states.push_back(kAllLabels[i]);
  m.n_sensors = n_sensors;
  m.pi = random_simplex(rng, n_states);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  for (std::size_t i = 0; i < n_states; ++i) {
    m.A.push_back(random_simplex(rng, n_states));
    std::vector<double> row(static_cast<std::size_t>(n_sensors));
    for (auto& b : row) b = u(rng);
    m.B.push_back(row);
  }
  m.fingerprint = "random";
  return m;
}

inline std::vector<Observation> random_observations(std::mt19937_64& rng, std::size_t T, int n_sensors) {
  std::bernoulli_distribution coin(0.35);
  std::vector<Observation> xs(T, Observation(static_cast<std::size_t>(n_sensors)));
  for (auto& x : xs)
    for (auto& v : x) v = coin(rng) ? 1 : 0;
  return xs;
}

// Probability-space joint p(path, x) computed without logs or shared code.
inline double joint_probability(const HmmModel& m, const std::vector<std::size_t>& path,
                                const std::vector<Observation>& xs) {
  double p = 1.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const std::size_t s = path[t];
    p *= t == 0 ? m.pi[s] : m.A[path[t - 1]][s];
    for (int k = 0; k < m.n_sensors; ++k) {
      const double b = m.B[s][static_cast<std::size_t>(k)];
      p *= xs[t][static_cast<std::size_t>(k)] ? b : 1.0 - b;
    }
  }
  return p;
}

struct BruteForce {
  std::vector<std::size_t> best;
  double best_log = -std::numeric_limits<double>::infinity();
  double runner_up_log = -std::numeric_limits<double>::infinity();
};

// Enumerates every state sequence; the first maximum in lexicographic order
// wins, which is the same as preferring lower state indices early.
inline BruteForce brute_force_decode(const HmmModel& m, const std::vector<Observation>& xs) {
  const std::size_t S = m.n_states();
  const std::size_t T = xs.size();
  BruteForce out;
  std::vector<std::size_t> path(T, 0);
  while (true) {
    double lp = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      lp += std::log(t == 0 ? m.pi[path[t]] : m.A[path[t - 1]][path[t]]);
      for (int k = 0; k < m.n_sensors; ++k) {
        const double b = m.B[path[t]][static_cast<std::size_t>(k)];
        lp += std::log(xs[t][static_cast<std::size_t>(k)] ? b : 1.0 - b);
      }
    }
    if (lp > out.best_log) {
      out.runner_up_log = out.best_log;
      out.best_log = lp;
      out.best = path;
    } else if (lp > out.runner_up_log) {
      out.runner_up_log = lp;
    }
    std::size_t t = T;
    while (t > 0) {
      --t;
      if (++path[t] < S) break;
      path[t] = 0;
      if (t == 0) return out;
    }
    if (T == 0) return out;
  }
}

}  // namespace adl::test
