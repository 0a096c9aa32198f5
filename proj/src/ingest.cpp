#include "adl/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace adl {
namespace {

using nlohmann::json;

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool skippable(const std::string& line) {
  const auto first = line.find_first_not_of(" \t\r");
  if (first == std::string::npos) return true;
  const char c = line[first];
  if (c == '#' || c == '-') return true;
  return line.compare(first, 5, "Start") == 0;
}

Timestamp parse_stamp(const std::vector<std::string>& tokens, std::size_t at,
                      const std::string& source, std::size_t line_no) {
  try {
    return parse_timestamp(tokens[at], tokens[at + 1]);
  } catch (const Error& e) {
    throw ParseError(source, line_no, e.what());
  }
}

}  // namespace

std::size_t Recording::slice_count() const {
  std::size_t n = 0;
  for (const auto& d : days) n += d.slices.size();
  return n;
}

// ---------------------------------------------------------------------------
// SensorMap
// ---------------------------------------------------------------------------

void SensorMap::add(std::string location, std::string kind, std::string place, int index) {
  if (index != size()) {
    throw Error("invalid_argument", "sensor indices must be added contiguously from 0");
  }
  if (resolve(location, kind, place)) {
    throw Error("invalid_argument", "duplicate sensor " + location + "/" + kind + "/" + place);
  }
  entries_.push_back({std::move(location), std::move(kind), std::move(place), index});
}

std::optional<int> SensorMap::resolve(const std::string& location, const std::string& kind,
                                      const std::string& place) const {
  for (const auto& e : entries_) {
    if (e.location == location && e.kind == kind && e.place == place) return e.index;
  }
  return std::nullopt;
}

const SensorMap::Entry& SensorMap::entry(int index) const { return entries_.at(index); }

SensorMap SensorMap::ordonez_a() {
  SensorMap m;
  m.add("Shower", "PIR", "Bathroom", 0);
  m.add("Basin", "PIR", "Bathroom", 1);
  m.add("Cooktop", "PIR", "Kitchen", 2);
  m.add("Maindoor", "Magnetic", "Entrance", 3);
  m.add("Fridge", "Magnetic", "Kitchen", 4);
  m.add("Cabinet", "Magnetic", "Bathroom", 5);
  m.add("Cupboard", "Magnetic", "Kitchen", 6);
  m.add("Toilet", "Flush", "Bathroom", 7);
  m.add("Seat", "Pressure", "Living", 8);
  m.add("Bed", "Pressure", "Bedroom", 9);
  m.add("Microwave", "Electric", "Kitchen", 10);
  m.add("Toaster", "Electric", "Kitchen", 11);
  return m;
}

SensorMap SensorMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open sensor map '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("parse", "sensor map '" + path.string() + "': " + e.what());
  }
  if (doc.value("version", 0) != 1) {
    throw Error("version", "sensor map '" + path.string() + "' has unsupported version");
  }
  std::vector<Entry> entries;
  for (const auto& s : doc.at("sensors")) {
    entries.push_back({s.at("location").get<std::string>(), s.at("kind").get<std::string>(),
                       s.at("place").get<std::string>(), s.at("index").get<int>()});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.index < b.index; });
  SensorMap m;
  for (auto& e : entries) m.add(e.location, e.kind, e.place, e.index);
  return m;
}

void SensorMap::save(const std::filesystem::path& path) const {
  json doc{{"version", 1}, {"sensors", json::array()}};
  for (const auto& e : entries_) {
    doc["sensors"].push_back(
        {{"location", e.location}, {"kind", e.kind}, {"place", e.place}, {"index", e.index}});
  }
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write sensor map '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

SensorMap SensorMap::from_names(std::istream& sensor_file) {
  std::set<std::tuple<std::string, std::string, std::string>> triples;
  std::string line;
  while (std::getline(sensor_file, line)) {
    if (skippable(line)) continue;
    auto tok = split_ws(line);
    if (tok.size() == 7) triples.emplace(tok[4], tok[5], tok[6]);
  }
  SensorMap m;
  int i = 0;
  for (const auto& [loc, kind, place] : triples) m.add(loc, kind, place, i++);
  return m;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

Dataset parse_dataset(std::istream& sensor_file, std::istream& activity_file,
                      const SensorMap& sensor_map) {
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(sensor_file, line)) {
    ++line_no;
    if (skippable(line)) continue;
    auto tok = split_ws(line);
    if (tok.size() != 7) {
      throw ParseError("sensors", line_no,
                       "expected 7 fields (start, end, location, kind, place), got " +
                           std::to_string(tok.size()));
    }
    SensorEvent ev;
    ev.start = parse_stamp(tok, 0, "sensors", line_no);
    ev.end = parse_stamp(tok, 2, "sensors", line_no);
    if (ev.end < ev.start) throw ParseError("sensors", line_no, "end precedes start");
    ev.location = tok[4];
    ev.kind = tok[5];
    ev.place = tok[6];
    auto idx = sensor_map.resolve(ev.location, ev.kind, ev.place);
    if (!idx) {
      throw ParseError("sensors", line_no,
                       "unknown sensor '" + ev.location + " " + ev.kind + " " + ev.place + "'");
    }
    ev.sensor_id = *idx;
    out.events.push_back(std::move(ev));
  }

  line_no = 0;
  while (std::getline(activity_file, line)) {
    ++line_no;
    if (skippable(line)) continue;
    auto tok = split_ws(line);
    if (tok.size() != 5) {
      throw ParseError("activities", line_no,
                       "expected 5 fields (start, end, label), got " + std::to_string(tok.size()));
    }
    ActivityAnnotation a;
    a.start = parse_stamp(tok, 0, "activities", line_no);
    a.end = parse_stamp(tok, 2, "activities", line_no);
    if (a.end < a.start) throw ParseError("activities", line_no, "end precedes start");
    auto label = parse_label(tok[4]);
    if (!label) throw ParseError("activities", line_no, "unknown activity label '" + tok[4] + "'");
    a.label = *label;
    out.annotations.push_back(a);
  }

  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const SensorEvent& a, const SensorEvent& b) { return a.start < b.start; });
  std::stable_sort(
      out.annotations.begin(), out.annotations.end(),
      [](const ActivityAnnotation& a, const ActivityAnnotation& b) { return a.start < b.start; });
  return out;
}

void write_sensor_file(std::ostream& out, const std::vector<SensorEvent>& events) {
  out << "Start time\t\tEnd time\t\tLocation\tType\tPlace\t\n";
  out << "----------\t\t--------\t\t--------\t----\t-----\t\n";
  for (const auto& e : events) {
    out << format_timestamp(e.start) << '\t' << format_timestamp(e.end) << '\t' << e.location
        << '\t' << e.kind << '\t' << e.place << "\t\n";
  }
}

void write_activity_file(std::ostream& out, const std::vector<ActivityAnnotation>& annotations) {
  out << "Start time\t\tEnd time\t\tActivity\n";
  out << "----------\t\t--------\t\t--------\n";
  for (const auto& a : annotations) {
    out << format_timestamp(a.start) << '\t' << format_timestamp(a.end) << '\t'
        << to_string(a.label) << "\t\n";
  }
}

DatasetFiles find_dataset_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("io", "dataset directory '" + dir.string() + "' not found");
  DatasetFiles files;
  std::vector<fs::path> entries;
  for (const auto& entry : fs::directory_iterator(dir)) entries.push_back(entry.path());
  std::sort(entries.begin(), entries.end());
  for (const auto& p : entries) {
    std::string name = p.filename().string();
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (p.extension() != ".txt") continue;
    if (files.sensors.empty() && name.find("sensors") != std::string::npos) files.sensors = p;
    if (files.activities.empty() && name.find("adls") != std::string::npos) files.activities = p;
  }
  if (files.sensors.empty() || files.activities.empty()) {
    throw Error("io", "dataset directory '" + dir.string() +
                          "' must contain *Sensors*.txt and *ADLs*.txt");
  }
  return files;
}

Dataset load_dataset(const std::filesystem::path& dir, const SensorMap& sensor_map) {
  const auto files = find_dataset_files(dir);
  std::ifstream s(files.sensors);
  std::ifstream a(files.activities);
  if (!s || !a) throw Error("io", "cannot open dataset files in '" + dir.string() + "'");
  return parse_dataset(s, a, sensor_map);
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

std::pair<Timestamp, Timestamp> dataset_range(const Dataset& dataset) {
  bool any = false;
  Timestamp lo = 0;
  Timestamp hi = 0;
  auto widen = [&](Timestamp s, Timestamp e) {
    if (!any) {
      lo = s;
      hi = e;
      any = true;
    }
    lo = std::min(lo, s);
    hi = std::max(hi, e);
  };
  for (const auto& e : dataset.events) widen(e.start, e.end);
  for (const auto& a : dataset.annotations) widen(a.start, a.end);
  if (!any) throw Error("invalid_argument", "empty dataset has no time range");
  return {midnight_floor(lo), midnight_ceil(hi + 1)};
}

Recording discretize(const std::vector<SensorEvent>& events,
                     const std::vector<ActivityAnnotation>& annotations, Timestamp t0,
                     Timestamp t1, int n_sensors, const DiscretizeOptions& options) {
  if (t0 != midnight_floor(t0) || t1 != midnight_floor(t1) || t1 < t0) {
    throw Error("invalid_argument", "discretization range must be midnight-aligned");
  }
  if (n_sensors <= 0) throw Error("invalid_argument", "n_sensors must be positive");

  std::vector<ActivityAnnotation> sorted(annotations.begin(), annotations.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ActivityAnnotation& a, const ActivityAnnotation& b) {
                     return a.start < b.start;
                   });
  if (options.overlap == AnnotationOverlap::kError) {
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      const auto& prev = sorted[i - 1];
      const auto& cur = sorted[i];
      if (cur.start < prev.end) {
        throw Error("overlap", "annotations overlap: " + std::string(to_string(prev.label)) +
                                   " [" + format_timestamp(prev.start) + ", " +
                                   format_timestamp(prev.end) + "] and " +
                                   std::string(to_string(cur.label)) + " [" +
                                   format_timestamp(cur.start) + ", " +
                                   format_timestamp(cur.end) + "]");
      }
    }
  }

  const auto total = static_cast<std::size_t>((t1 - t0 + kSliceSeconds - 1) / kSliceSeconds);
  std::vector<std::vector<std::uint8_t>> x(total, std::vector<std::uint8_t>(n_sensors, 0));

  for (const auto& ev : events) {
    if (ev.sensor_id < 0 || ev.sensor_id >= n_sensors) {
      throw Error("invalid_argument", "sensor id " + std::to_string(ev.sensor_id) +
                                          " outside 0.." + std::to_string(n_sensors - 1));
    }
    // closed second range [start, end] == half-open [start, end + 1)
    const Timestamp lo = std::max(ev.start, t0);
    const Timestamp hi = std::min(ev.end + 1, t1);
    if (hi <= lo) continue;
    const auto first = static_cast<std::size_t>((lo - t0) / kSliceSeconds);
    const auto last = static_cast<std::size_t>((hi - 1 - t0) / kSliceSeconds);
    for (std::size_t t = first; t <= last && t < total; ++t) x[t][ev.sensor_id] = 1;
  }

  Recording rec;
  rec.n_sensors = n_sensors;
  std::size_t cursor = 0;
  for (std::size_t t = 0; t < total; ++t) {
    const Timestamp start = t0 + static_cast<Timestamp>(t) * kSliceSeconds;
    const Timestamp mid = start + kSliceSeconds / 2;
    if (rec.days.empty() || midnight_floor(start) != rec.days.back().date) {
      rec.days.push_back(Day{midnight_floor(start), {}});
      rec.days.back().slices.reserve(kSlicesPerDay);
    }

    // Last annotation starting at or before mid; walk back for the latest
    // starting one that still contains mid.
    while (cursor < sorted.size() && sorted[cursor].start <= mid) ++cursor;
    ActivityLabel label = ActivityLabel::IdleUnlabeled;
    for (std::size_t k = cursor; k-- > 0;) {
      if (sorted[k].end >= mid) {
        label = sorted[k].label;
        break;
      }
      if (options.overlap == AnnotationOverlap::kError) break;
    }

    TimeSlice s;
    s.t = static_cast<int>(rec.days.back().slices.size());
    s.wallclock = start;
    s.x = std::move(x[t]);
    s.y = label;
    rec.days.back().slices.push_back(std::move(s));
  }
  return rec;
}

Recording discretize(const Dataset& dataset, int n_sensors, const DiscretizeOptions& options) {
  const auto [t0, t1] = dataset_range(dataset);
  return discretize(dataset.events, dataset.annotations, t0, t1, n_sensors, options);
}

void write_slices_jsonl(std::ostream& out, const Recording& recording) {
  for (const auto& day : recording.days) {
    const std::string date = format_date(day.date);
    for (const auto& s : day.slices) {
      json rec{{"day", date}, {"t", s.t}, {"wallclock", format_timestamp(s.wallclock)}, {"x", s.x}};
      rec["y"] = s.y ? json(std::string(to_string(*s.y))) : json(nullptr);
      out << rec.dump() << '\n';
    }
  }
}

Recording read_slices_jsonl(std::istream& in) {
  Recording rec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      TimeSlice s;
      s.t = j.at("t").get<int>();
      s.wallclock = parse_timestamp(j.at("wallclock").get<std::string>());
      s.x = j.at("x").get<std::vector<std::uint8_t>>();
      if (!j.at("y").is_null()) s.y = label_from_string(j.at("y").get<std::string>());
      const Timestamp date = parse_timestamp(j.at("day").get<std::string>() + " 00:00:00");
      if (rec.days.empty() || rec.days.back().date != date) rec.days.push_back(Day{date, {}});
      if (rec.n_sensors == 0) rec.n_sensors = static_cast<int>(s.x.size());
      if (static_cast<int>(s.x.size()) != rec.n_sensors) {
        throw Error("parse", "inconsistent sensor vector length");
      }
      rec.days.back().slices.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError("slices", line_no, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError("slices", line_no, e.what());
    }
  }
  return rec;
}

}  // namespace adl
