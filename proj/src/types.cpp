#include "adl/types.hpp"

#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>

namespace adl {
namespace {

constexpr std::array<std::string_view, kNumLabels> kLabelNames = {
    "Leaving", "Toileting", "Showering", "Sleeping", "Breakfast",  "Dinner",
    "IdleUnlabeled", "Lunch", "Snack", "SpareTimeTV", "Grooming",
};

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

int parse_int(std::string_view text, std::string_view whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw Error("parse", "malformed datetime '" + std::string(whole) + "'");
  }
  return value;
}

}  // namespace

std::string_view to_string(ActivityLabel label) { return kLabelNames.at(index_of(label)); }

std::optional<ActivityLabel> parse_label(std::string_view text) {
  const std::string key = normalize(text);
  if (key.empty()) return std::nullopt;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (normalize(kLabelNames[i]) == key) return static_cast<ActivityLabel>(i);
  }
  if (key == "idle" || key == "unlabeled") return ActivityLabel::IdleUnlabeled;
  if (key == "sparetime" || key == "tv") return ActivityLabel::SpareTimeTV;
  return std::nullopt;
}

ActivityLabel label_from_string(std::string_view text) {
  auto label = parse_label(text);
  if (!label) throw Error("parse", "unknown activity label '" + std::string(text) + "'");
  return *label;
}

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour, int minute,
                         int second) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok()) throw Error("parse", "invalid calendar date");
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * kSecondsPerDay + hour * 3600 + minute * 60 + second;
}

Timestamp parse_timestamp(std::string_view date, std::string_view time) {
  std::string whole = std::string(date) + " " + std::string(time);
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') {
    throw Error("parse", "malformed date '" + whole + "'");
  }
  if (time.size() != 8 || time[2] != ':' || time[5] != ':') {
    throw Error("parse", "malformed time '" + whole + "'");
  }
  const int y = parse_int(date.substr(0, 4), whole);
  const int mo = parse_int(date.substr(5, 2), whole);
  const int d = parse_int(date.substr(8, 2), whole);
  const int h = parse_int(time.substr(0, 2), whole);
  const int mi = parse_int(time.substr(3, 2), whole);
  const int s = parse_int(time.substr(6, 2), whole);
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) {
    throw Error("parse", "out-of-range datetime '" + whole + "'");
  }
  return make_timestamp(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, s);
}

Timestamp parse_timestamp(std::string_view datetime) {
  if (datetime.size() != 19 || (datetime[10] != ' ' && datetime[10] != 'T')) {
    throw Error("parse", "malformed datetime '" + std::string(datetime) + "'");
  }
  return parse_timestamp(datetime.substr(0, 10), datetime.substr(11));
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const Timestamp day = midnight_floor(ts);
  const Timestamp rem = ts - day;
  const year_month_day ymd{sys_days{days{day / kSecondsPerDay}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::string format_date(Timestamp ts) { return format_timestamp(ts).substr(0, 10); }

std::string format_clock(Timestamp ts) {
  const Timestamp rem = ts - midnight_floor(ts);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%d:%02d", static_cast<int>(rem / 3600),
                static_cast<int>(rem / 60 % 60));
  return buf;
}

Timestamp midnight_floor(Timestamp ts) {
  Timestamp q = ts / kSecondsPerDay;
  if (ts % kSecondsPerDay < 0) --q;
  return q * kSecondsPerDay;
}

Timestamp midnight_ceil(Timestamp ts) {
  const Timestamp f = midnight_floor(ts);
  return f == ts ? f : f + kSecondsPerDay;
}

}  // namespace adl
