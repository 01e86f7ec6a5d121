#include "stationfill/qc.hpp"

#include <cmath>

#include "stationfill/error.hpp"

namespace stationfill {

QcRuleSet QcRuleSet::defaults(Parameter p) {
  const auto r = plausible_range(p);
  QcRuleSet rules;
  rules.range_min = r.min;
  rules.range_max = r.max;
  rules.max_step = p == Parameter::Temperature ? 10.0 : 40.0;
  rules.flatline_len = 24;
  return rules;
}

void QcRuleSet::validate() const {
  if (!(range_min < range_max)) throw Error(ErrorCode::InvalidArgument, "qc: range_min must be < range_max");
  if (!(max_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "qc: max_step must be > 0");
  if (flatline_len < 3) throw Error(ErrorCode::InvalidArgument, "qc: flatline_len must be >= 3");
}

std::pair<StationSeries, QcReport> apply_qc(const StationSeries& series, const QcRuleSet& rules) {
  rules.validate();
  std::vector<double> v(series.values().begin(), series.values().end());
  QcReport report;
  report.station_id = series.station_id();
  report.total_hours = v.size();

  for (double& x : v) {
    if (is_sentinel(x)) {
      ++report.counts.already_missing;
    } else if (x < rules.range_min || x > rules.range_max) {
      x = kSentinel;
      ++report.counts.out_of_range;
    }
  }

  // Sequential so that a flagged spike does not also flag its successor.
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (is_sentinel(v[i]) || is_sentinel(v[i - 1])) continue;
    if (std::abs(v[i] - v[i - 1]) > rules.max_step) {
      v[i] = kSentinel;
      ++report.counts.spike;
    }
  }

  const bool humidity = series.parameter() == Parameter::RelativeHumidity;
  std::size_t run = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (is_sentinel(v[i])) {
      run = 0;
      continue;
    }
    run = (run > 0 && i > 0 && !is_sentinel(v[i - 1]) && v[i] == v[i - 1]) ? run + 1 : 1;
    // A flagged reading ends the run, so compare against the value we just kept.
    if (run >= static_cast<std::size_t>(rules.flatline_len) && !(humidity && v[i] == 100.0)) {
      const double stuck = v[i];
      std::size_t j = i;
      while (j < v.size() && !is_sentinel(v[j]) && v[j] == stuck) {
        v[j] = kSentinel;
        ++report.counts.flatline;
        ++j;
      }
      i = j - 1;
      run = 0;
    }
  }

  std::size_t missing = 0;
  for (double x : v) missing += is_sentinel(x) ? 1 : 0;
  report.missing_fraction = v.empty() ? 0.0 : static_cast<double>(missing) / static_cast<double>(v.size());
  return {series.with_values(std::move(v)), report};
}

StationSeries exclude_ranges(const StationSeries& series, const std::vector<DateRange>& ranges) {
  std::vector<double> v(series.values().begin(), series.values().end());
  for (const auto& r : ranges) {
    if (!r.from.valid() || !r.to.valid()) throw Error(ErrorCode::InvalidStamp, "exclusion range");
    const std::int64_t lo = r.from.ordinal() - series.start_ordinal();
    const std::int64_t hi = r.to.ordinal() - series.start_ordinal();
    for (std::int64_t i = std::max<std::int64_t>(lo, 0);
         i <= std::min<std::int64_t>(hi, static_cast<std::int64_t>(v.size()) - 1); ++i)
      v[static_cast<std::size_t>(i)] = kSentinel;
  }
  return series.with_values(std::move(v));
}

MissingProbabilityTable missing_probabilities(const StationNetwork& network) {
  if (network.hours() == 0) throw Error(ErrorCode::EmptyNetwork, "network has zero hours");
  std::array<std::size_t, kInputStations + 1> counts{};
  for (std::size_t h = 0; h < network.hours(); ++h) {
    std::size_t k = 0;
    for (const auto& s : network.inputs()) k += is_sentinel(s[h]) ? 1 : 0;
    ++counts[k];
  }
  MissingProbabilityTable t;
  t.hours = network.hours();
  for (std::size_t k = 0; k <= kInputStations; ++k)
    t.percent[k] = 100.0 * static_cast<double>(counts[k]) / static_cast<double>(t.hours);
  return t;
}

}  // namespace stationfill
