// include/adl/ingest.hpp
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adl/types.hpp"

namespace adl {

struct SensorEvent {
  int sensor_id = 0;
  Timestamp start = 0;
  Timestamp end = 0;
  std::string location;
  std::string kind;
  std::string place;

  bool operator==(const SensorEvent&) const = default;
};

struct ActivityAnnotation {
  ActivityLabel label = ActivityLabel::IdleUnlabeled;
  Timestamp start = 0;
  Timestamp end = 0;

  bool operator==(const ActivityAnnotation&) const = default;
};

struct TimeSlice {
  int t = 0;  // index within its day
  Timestamp wallclock = 0;
  std::vector<std::uint8_t> x;
  std::optional<ActivityLabel> y;

  bool operator==(const TimeSlice&) const = default;
};

struct Day {
  Timestamp date = 0;  // local midnight
  std::vector<TimeSlice> slices;

  bool operator==(const Day&) const = default;
};

struct Recording {
  int n_sensors = 0;
  std::vector<Day> days;

  std::size_t slice_count() const;
  bool operator==(const Recording&) const = default;
};

struct Dataset {
  std::vector<SensorEvent> events;
  std::vector<ActivityAnnotation> annotations;
};

// Maps a sensor's (location, kind, place) triple to its observation index.
class SensorMap {
 public:
  struct Entry {
    std::string location;
    std::string kind;
    std::string place;
    int index = 0;
  };

  void add(std::string location, std::string kind, std::string place, int index);
  std::optional<int> resolve(const std::string& location, const std::string& kind,
                             const std::string& place) const;
  const Entry& entry(int index) const;
  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }

  // The twelve sensors of the OrdonezA household.
  static SensorMap ordonez_a();
  // {"version":1,"sensors":[{"location":..,"kind":..,"place":..,"index":..}]}
  static SensorMap load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  // Indices assigned in sorted triple order; for datasets without a map file.
  static SensorMap from_names(std::istream& sensor_file);

 private:
  std::vector<Entry> entries_;  // ordered by index
};

class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : Error("parse", source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Tab/whitespace-delimited records in the public dataset layout. Header and
// dashed separator lines are skipped. Events come back sorted by start.
Dataset parse_dataset(std::istream& sensor_file, std::istream& activity_file,
                      const SensorMap& sensor_map);

void write_sensor_file(std::ostream& out, const std::vector<SensorEvent>& events);
void write_activity_file(std::ostream& out, const std::vector<ActivityAnnotation>& annotations);

struct DatasetFiles {
  std::filesystem::path sensors;
  std::filesystem::path activities;
};

// Locates "*Sensors*.txt" and "*ADLs*.txt" in a directory.
DatasetFiles find_dataset_files(const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir, const SensorMap& sensor_map);

enum class AnnotationOverlap {
  kError,      // overlapping annotations are rejected
  kLaterWins,  // the later-starting annotation labels contested slices
};

struct DiscretizeOptions {
  AnnotationOverlap overlap = AnnotationOverlap::kError;
};

// [midnight before the first record, midnight after the last record).
std::pair<Timestamp, Timestamp> dataset_range(const Dataset& dataset);

// Sensor i is on in slice t iff one of its events, read as the closed
// second range [start, end], shares at least one second with the slice.
// Slice labels come from the annotation containing the slice midpoint.
Recording discretize(const std::vector<SensorEvent>& events,
                     const std::vector<ActivityAnnotation>& annotations, Timestamp t0,
                     Timestamp t1, int n_sensors, const DiscretizeOptions& options = {});

Recording discretize(const Dataset& dataset, int n_sensors,
                     const DiscretizeOptions& options = {});

// One JSON object per slice: {"day","t","wallclock","x","y"}.
void write_slices_jsonl(std::ostream& out, const Recording& recording);
Recording read_slices_jsonl(std::istream& in);

}  // namespace adl
