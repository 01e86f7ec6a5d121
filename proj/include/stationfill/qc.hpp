#pragma once

#include <array>
#include <string>
#include <vector>

#include "stationfill/timeseries.hpp"

namespace stationfill {

/// Range, step and stuck-sensor thresholds for one parameter.
struct QcRuleSet {
  double range_min = -30.0;
  double range_max = 50.0;
  double max_step = 10.0;   // per hour
  int flatline_len = 24;    // hours

  static QcRuleSet defaults(Parameter p);
  void validate() const;
};

struct QcCounts {
  std::size_t already_missing = 0;
  std::size_t out_of_range = 0;
  std::size_t spike = 0;
  std::size_t flatline = 0;

  std::size_t flagged() const noexcept { return out_of_range + spike + flatline; }
};

struct QcReport {
  std::string station_id;
  QcCounts counts;
  std::size_t total_hours = 0;
  double missing_fraction = 0.0;
};

/// Flags readings by precedence range -> spike -> flatline and replaces them with the sentinel.
/// Never fails; a second pass over its own output flags nothing.
std::pair<StationSeries, QcReport> apply_qc(const StationSeries& series, const QcRuleSet& rules);

struct DateRange {
  HourStamp from;
  HourStamp to;  // inclusive
};

/// Sets every reading inside the given ranges to the sentinel.
StationSeries exclude_ranges(const StationSeries& series, const std::vector<DateRange>& ranges);

/// Percent of hours in which exactly k of the six inputs are sentinel, k = 0..6.
struct MissingProbabilityTable {
  std::array<double, kInputStations + 1> percent{};
  std::size_t hours = 0;
};

MissingProbabilityTable missing_probabilities(const StationNetwork& network);

}  // namespace stationfill
