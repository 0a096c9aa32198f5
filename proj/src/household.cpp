#include "adl/household.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace adl {
namespace {

enum Sensor : int {
  kShower = 0,
  kBasin = 1,
  kCooktop = 2,
  kMaindoor = 3,
  kFridge = 4,
  kCabinet = 5,
  kCupboard = 6,
  kToilet = 7,
  kSeat = 8,
  kBed = 9,
  kMicrowave = 10,
  kToaster = 11,
};

class Generator {
 public:
  explicit Generator(const HouseholdConfig& c) : config_(c), rng_(c.seed), map_(SensorMap::ordonez_a()) {}

  Dataset run() {
    cursor_ = config_.start;
    const Timestamp end = config_.start + config_.n_days * kSecondsPerDay;
    // The recording opens mid-sleep.
    Timestamp wake = config_.start + minutes(normal(470, 20), 400, 540) * 60;
    sleep_until(wake);
    for (int d = 0; d < config_.n_days; ++d) {
      const Timestamp midnight = config_.start + d * kSecondsPerDay;
      day(midnight);
      const Timestamp next_wake = midnight + kSecondsPerDay + minutes(normal(470, 20), 400, 540) * 60;
      sleep_until(std::min(next_wake, end));
      if (cursor_ >= end) break;
    }
    spurious(config_.start, end);
    std::sort(out_.events.begin(), out_.events.end(),
              [](const SensorEvent& a, const SensorEvent& b) {
                return std::tie(a.start, a.sensor_id, a.end) < std::tie(b.start, b.sensor_id, b.end);
              });
    return std::move(out_);
  }

 private:
  double normal(double mu, double sigma) { return std::normal_distribution<double>(mu, sigma)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  static int minutes(double v, int lo, int hi) {
    return std::clamp(static_cast<int>(std::lround(v)), lo, hi);
  }

  void fire(int sensor, Timestamp a, Timestamp b) {
    if (b < a) return;
    if (chance(config_.noise)) return;
    const auto& e = map_.entry(sensor);
    out_.events.push_back({sensor, a, b, e.location, e.kind, e.place});
  }

  // Short bursts roughly every `gap` seconds across [a, b).
  void bursts(int sensor, Timestamp a, Timestamp b, int gap, int lo, int hi) {
    for (Timestamp t = a + uniform(0, gap / 2); t < b; t += uniform(gap / 2, gap + gap / 2)) {
      fire(sensor, t, std::min<Timestamp>(b - 1, t + uniform(lo, hi)));
    }
  }

  void gap(int max_minutes) {
    const int g = minutes(std::abs(normal(0, max_minutes / 2.0)), 0, max_minutes);
    cursor_ += g * 60 + uniform(0, 59);
  }

  void act(ActivityLabel label, int mins) {
    mins = std::max(1, mins);
    const Timestamp a = cursor_;
    const Timestamp b = a + mins * 60;
    out_.annotations.push_back({label, a, b - 1});
    sensors(label, a, b);
    cursor_ = b;
  }

  void fill_until(Timestamp target, ActivityLabel label) {
    while (cursor_ + 20 * 60 < target) {
      const int left = static_cast<int>((target - cursor_) / 60);
      const int chunk = std::min(left, minutes(normal(70, 25), 20, 150));
      act(label, chunk);
      if (cursor_ + 15 * 60 < target && chance(0.35)) {
        act(ActivityLabel::Toileting, minutes(normal(4, 1.5), 1, 9));
      } else {
        gap(6);
      }
    }
    if (cursor_ < target) cursor_ = target;
  }

  void sleep_until(Timestamp target) {
    if (target <= cursor_) return;
    const int total = static_cast<int>((target - cursor_) / 60);
    if (total > 300 && chance(0.3)) {
      const int first = uniform(total / 3, 2 * total / 3);
      act(ActivityLabel::Sleeping, first);
      act(ActivityLabel::Toileting, minutes(normal(4, 1), 2, 8));
    }
    const int rest = static_cast<int>((target - cursor_) / 60);
    if (rest > 0) act(ActivityLabel::Sleeping, rest);
    cursor_ = std::max(cursor_, target);
  }

  void day(Timestamp midnight) {
    auto at = [&](double mu, double sigma) { return midnight + minutes(normal(mu, sigma), 0, 1439) * 60; };

    act(ActivityLabel::Toileting, minutes(normal(4, 1.5), 1, 9));
    gap(3);
    if (chance(0.7)) act(ActivityLabel::Grooming, minutes(normal(8, 3), 2, 20));
    gap(3);
    if (chance(0.6)) act(ActivityLabel::Showering, minutes(normal(12, 3), 5, 25));
    gap(6);
    act(ActivityLabel::Breakfast, minutes(normal(18, 4), 8, 35));
    gap(5);
    act(ActivityLabel::SpareTimeTV, minutes(normal(80, 25), 20, 150));
    gap(5);
    if (chance(0.5)) act(ActivityLabel::Toileting, minutes(normal(4, 1.5), 1, 9));
    if (chance(0.7)) {
      gap(4);
      act(ActivityLabel::Leaving, minutes(normal(110, 35), 30, 200));
    }
    gap(10);
    fill_until(std::max(cursor_, at(810, 25)), ActivityLabel::SpareTimeTV);
    act(ActivityLabel::Lunch, minutes(normal(40, 8), 20, 60));
    gap(4);
    act(ActivityLabel::Toileting, minutes(normal(4, 1.5), 1, 9));
    gap(8);
    act(ActivityLabel::SpareTimeTV, minutes(normal(110, 30), 40, 180));
    gap(6);
    if (chance(0.6)) act(ActivityLabel::Snack, minutes(normal(8, 3), 3, 15));
    if (chance(0.3)) {
      gap(5);
      act(ActivityLabel::Leaving, minutes(normal(60, 20), 20, 110));
    }
    gap(10);
    fill_until(std::max(cursor_, at(1230, 20)), ActivityLabel::SpareTimeTV);
    act(ActivityLabel::Dinner, minutes(normal(35, 8), 15, 55));
    gap(4);
    if (chance(0.8)) act(ActivityLabel::Toileting, minutes(normal(4, 1.5), 1, 9));
    gap(6);
    fill_until(std::max(cursor_, at(1375, 15)), ActivityLabel::SpareTimeTV);
    if (chance(0.5)) act(ActivityLabel::Grooming, minutes(normal(6, 2), 2, 12));
    gap(2);
    act(ActivityLabel::Toileting, minutes(normal(4, 1), 1, 8));
    gap(3);
  }

  void sensors(ActivityLabel label, Timestamp a, Timestamp b) {
    switch (label) {
      case ActivityLabel::Sleeping:
        fire(kBed, a + uniform(10, 60), b - uniform(10, 60));
        break;
      case ActivityLabel::Toileting:
        fire(kBasin, a + uniform(0, 20), a + uniform(30, 60));
        fire(kToilet, a + uniform(20, 40), b - uniform(5, 20));
        break;
      case ActivityLabel::Showering:
        fire(kBasin, a, a + uniform(20, 50));
        bursts(kShower, a + 30, b, 120, 40, 100);
        break;
      case ActivityLabel::Grooming:
        fire(kCabinet, a + uniform(5, 40), a + uniform(60, 100));
        bursts(kBasin, a, b, 90, 30, 80);
        break;
      case ActivityLabel::Breakfast:
        fire(kCupboard, a + uniform(0, 60), a + uniform(70, 120));
        fire(kFridge, a + uniform(60, 180), a + uniform(200, 260));
        fire(kToaster, a + uniform(240, 300), a + uniform(420, 540));
        if (chance(0.5)) fire(kCupboard, b - uniform(60, 120), b - uniform(5, 50));
        break;
      case ActivityLabel::Lunch:
        fire(kFridge, a + uniform(0, 60), a + uniform(70, 150));
        fire(kCupboard, a + uniform(100, 200), a + uniform(210, 280));
        bursts(kCooktop, a + 300, b - 600, 150, 50, 130);
        break;
      case ActivityLabel::Dinner:
        fire(kFridge, a + uniform(0, 60), a + uniform(70, 130));
        fire(kMicrowave, a + uniform(150, 200), a + uniform(400, 500));
        fire(kCupboard, a + uniform(520, 600), a + uniform(610, 660));
        break;
      case ActivityLabel::Snack:
        fire(kFridge, a + uniform(0, 40), a + uniform(50, 90));
        if (chance(0.6)) fire(kCupboard, a + uniform(90, 130), a + uniform(140, 170));
        break;
      case ActivityLabel::SpareTimeTV: {
        Timestamp t = a + uniform(10, 60);
        while (t < b - 60) {
          const Timestamp stop = std::min<Timestamp>(b - uniform(10, 40), t + uniform(900, 3600));
          fire(kSeat, t, stop);
          t = stop + uniform(60, 240);
        }
        break;
      }
      case ActivityLabel::Leaving:
        fire(kMaindoor, a + uniform(0, 30), a + uniform(35, 60));
        fire(kMaindoor, b - uniform(40, 60), b - uniform(1, 30));
        break;
      case ActivityLabel::IdleUnlabeled:
        break;
    }
  }

  void spurious(Timestamp t0, Timestamp t1) {
    const double per_day = 40.0 * config_.noise;
    std::poisson_distribution<int> count(per_day * config_.n_days);
    const int n = count(rng_);
    std::uniform_int_distribution<Timestamp> when(t0, t1 - 120);
    for (int i = 0; i < n; ++i) {
      const int sensor = uniform(0, map_.size() - 1);
      const Timestamp a = when(rng_);
      const auto& e = map_.entry(sensor);
      out_.events.push_back({sensor, a, a + uniform(2, 40), e.location, e.kind, e.place});
    }
  }

  HouseholdConfig config_;
  std::mt19937_64 rng_;
  SensorMap map_;
  Dataset out_;
  Timestamp cursor_ = 0;
};

}  // namespace

Dataset generate_household(const HouseholdConfig& config) {
  if (config.n_days < 1) throw Error("invalid_argument", "household needs at least one day");
  if (config.noise < 0.0 || config.noise > 0.5) throw Error("invalid_argument", "household noise must be in [0, 0.5]");
  if (config.start != midnight_floor(config.start)) throw Error("invalid_argument", "household start must be a midnight");
  return Generator(config).run();
}

DatasetFiles write_household(const std::filesystem::path& dir, const HouseholdConfig& config,
                             const std::string& prefix) {
  std::filesystem::create_directories(dir);
  const Dataset data = generate_household(config);
  DatasetFiles files{dir / (prefix + "_Sensors.txt"), dir / (prefix + "_ADLs.txt")};
  std::ofstream s(files.sensors);
  std::ofstream a(files.activities);
  if (!s || !a) throw Error("io", "cannot write household files into '" + dir.string() + "'");
  write_sensor_file(s, data.events);
  write_activity_file(a, data.annotations);
  return files;
}

Recording household_recording(const HouseholdConfig& config) {
  const Dataset data = generate_household(config);
  return discretize(data.events, data.annotations, config.start,
                    config.start + config.n_days * kSecondsPerDay, SensorMap::ordonez_a().size());
}

}  // namespace adl
