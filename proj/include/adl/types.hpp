// include/adl/types.hpp
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace adl {

// Seconds since 1970-01-01 00:00:00 in the household's local civil time.
// Dataset timestamps carry no zone, so no conversion is ever applied.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSliceSeconds = 60;
inline constexpr Timestamp kSecondsPerDay = 86400;
inline constexpr int kSlicesPerDay = 1440;

// Errors carry a short machine-readable code ("parse", "io", "version", ...)
// next to the human message so the CLI can print a single parseable line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

enum class ActivityLabel : std::uint8_t {
  Leaving = 0,
  Toileting,
  Showering,
  Sleeping,
  Breakfast,
  Dinner,
  IdleUnlabeled,
  Lunch,
  Snack,
  SpareTimeTV,
  Grooming,
};

inline constexpr std::size_t kNumLabels = 11;

inline constexpr std::array<ActivityLabel, kNumLabels> kAllLabels = {
    ActivityLabel::Leaving,   ActivityLabel::Toileting,     ActivityLabel::Showering,
    ActivityLabel::Sleeping,  ActivityLabel::Breakfast,     ActivityLabel::Dinner,
    ActivityLabel::IdleUnlabeled, ActivityLabel::Lunch,     ActivityLabel::Snack,
    ActivityLabel::SpareTimeTV, ActivityLabel::Grooming,
};

constexpr std::size_t index_of(ActivityLabel label) { return static_cast<std::size_t>(label); }

std::string_view to_string(ActivityLabel label);

// Accepts the canonical names plus the spellings found in the public dataset
// files ("Spare_Time/TV", "Idle", "Idle/Unlabeled", ...).
std::optional<ActivityLabel> parse_label(std::string_view text);

// Throwing variant for config and artifact loading.
ActivityLabel label_from_string(std::string_view text);

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                         int second = 0);

// "YYYY-MM-DD" + "HH:MM:SS"; throws Error{"parse"} on malformed input.
Timestamp parse_timestamp(std::string_view date, std::string_view time);
// Single "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DDTHH:MM:SS" string.
Timestamp parse_timestamp(std::string_view datetime);

std::string format_timestamp(Timestamp ts);
std::string format_date(Timestamp ts);
// "8:30" style clock time used in dialogue output.
std::string format_clock(Timestamp ts);

Timestamp midnight_floor(Timestamp ts);
Timestamp midnight_ceil(Timestamp ts);

}  // namespace adl
