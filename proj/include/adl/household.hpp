// include/adl/household.hpp
#pragma once

#include <cstdint>
#include <filesystem>

#include "adl/ingest.hpp"

namespace adl {

// Seeded single-resident routine over the twelve OrdonezA sensors, written
// in the public file layout. Stands in for the real recordings in tests and
// demos.
struct HouseholdConfig {
  Timestamp start = make_timestamp(2011, 11, 28);  // first midnight
  int n_days = 14;
  std::uint64_t seed = 7;
  double noise = 0.03;  // share of dropped sensor events; also scales spurious ones
};

Dataset generate_household(const HouseholdConfig& config);

// Writes <prefix>_Sensors.txt and <prefix>_ADLs.txt into `dir`.
DatasetFiles write_household(const std::filesystem::path& dir, const HouseholdConfig& config,
                             const std::string& prefix = "Household");

// Discretized over [start, start + n_days).
Recording household_recording(const HouseholdConfig& config);

}  // namespace adl
