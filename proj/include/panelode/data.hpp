#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "panelode/types.hpp"

namespace panelode::data {

/// Linear map between calendar years and model time: year0 -> 0, year1 -> 1.
struct TimeScale {
  scalar_t year0 = 2007.0;
  scalar_t year1 = 2020.0;

  scalar_t normalize(scalar_t year) const { return (year - year0) / (year1 - year0); }
  scalar_t denormalize(scalar_t t) const { return year0 + (year1 - year0) * t; }
};

/// CSV column order; also the indicator order of every model output.
inline constexpr std::array<const char*, 6> kIndicatorColumns = {
    "toilet", "piped_water", "lpg", "pucca_house", "electricity", "education_secondary"};

/// (district x time x indicator) observation tensor with masks. Districts are
/// ordered by first appearance in the source file; years ascend.
struct IndicatorPanel {
  std::vector<std::string> district_names;
  std::vector<std::string> indicator_names;
  std::vector<scalar_t> years;
  std::vector<mat_t> values;  // per district, (n_times x n_indicators)
  std::vector<mask_t> mask;   // true = observed

  index_t n_districts() const { return static_cast<index_t>(district_names.size()); }
  index_t n_times() const { return static_cast<index_t>(years.size()); }
  index_t n_indicators() const { return static_cast<index_t>(indicator_names.size()); }

  TimeScale time_scale() const;
  std::vector<scalar_t> normalized_times() const;

  /// District series with masked cells zeroed; the encoder input.
  mat_t masked_series(index_t d) const;

  long unmasked_count() const;
  void validate() const;
};

IndicatorPanel load_panel(const std::string& path);
void write_panel(const IndicatorPanel& panel, const std::string& path);

/// Logistic-growth panel over {2007, 2015, 2020} with district-specific
/// rates; every cell observed. Deterministic given seed.
IndicatorPanel synth_panel(index_t n_districts, std::uint64_t seed);

/// The 30 district names, in the row order of the published forecast tables.
const std::vector<std::string>& odisha_district_names();

/// Published forecast fixtures; used for output-format conformance and
/// plausibility ranges, never as exact-match targets.
struct ReferenceTables {
  std::vector<std::string> districts;  // 30 rows
  mat_t y2026;                         // 30 x 6, indicator order of kIndicatorColumns
  mat_t y2030;
};

const ReferenceTables& reference_tables();

}  // namespace panelode::data
