#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stationfill {

/// The in-band marker for missing or anomalous readings.
inline constexpr double kSentinel = -999.0;

constexpr double sentinel() noexcept { return kSentinel; }
constexpr bool is_sentinel(double v) noexcept { return v == kSentinel; }

/// Naive local hour label (no time zone, no DST).
struct HourStamp {
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;

  bool valid() const noexcept;

  /// Hours since 1970-01-01 00:00.
  std::int64_t ordinal() const noexcept;
  static HourStamp from_ordinal(std::int64_t hours) noexcept;

  HourStamp next() const noexcept { return from_ordinal(ordinal() + 1); }
  HourStamp prev() const noexcept { return from_ordinal(ordinal() - 1); }
  HourStamp plus(std::int64_t hours) const noexcept { return from_ordinal(ordinal() + hours); }

  std::string to_string() const;  // "YYYY-MM-DDTHH"
  static HourStamp parse(std::string_view text);

  friend bool operator==(const HourStamp&, const HourStamp&) = default;
  friend auto operator<=>(const HourStamp&, const HourStamp&) = default;
};

enum class Parameter { Temperature, RelativeHumidity };

std::string_view to_string(Parameter p);
Parameter parse_parameter(std::string_view text);

struct PlausibleRange {
  double min;
  double max;
};

/// Physical plausibility bounds used as the default QC range.
PlausibleRange plausible_range(Parameter p) noexcept;
/// Wider bounds accepted at ingestion; anything outside is stored as sentinel.
PlausibleRange raw_range(Parameter p) noexcept;

/// One station's hourly readings on a gap-free index starting at `start`.
class StationSeries {
 public:
  StationSeries() = default;
  StationSeries(std::string station_id, Parameter parameter, HourStamp start,
                std::vector<double> values);

  const std::string& station_id() const noexcept { return station_id_; }
  Parameter parameter() const noexcept { return parameter_; }
  HourStamp start() const noexcept { return start_; }
  HourStamp end() const noexcept { return start_.plus(static_cast<std::int64_t>(values_.size()) - 1); }
  std::int64_t start_ordinal() const noexcept { return start_ordinal_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  /// Value at an absolute hour; sentinel outside the index.
  double at_ordinal(std::int64_t hour) const noexcept;
  std::size_t sentinel_count() const noexcept;

  StationSeries with_values(std::vector<double> values) const;

  friend bool operator==(const StationSeries&, const StationSeries&) = default;

 private:
  std::string station_id_;
  Parameter parameter_ = Parameter::Temperature;
  HourStamp start_;
  std::int64_t start_ordinal_ = 0;
  std::vector<double> values_;
};

struct HourRecord {
  HourStamp stamp;
  double value;
};

struct BuildStats {
  std::size_t duplicates = 0;
  std::size_t out_of_raw_range = 0;
  std::size_t gap_hours = 0;
};

StationSeries build_series(std::span<const HourRecord> records, const std::string& station_id,
                           Parameter parameter, BuildStats* stats = nullptr);

inline constexpr std::size_t kInputStations = 6;

/// Target plus six input stations on one shared hourly index.
class StationNetwork {
 public:
  StationNetwork() = default;

  const std::string& target_id() const noexcept { return target_.station_id(); }
  std::vector<std::string> input_ids() const;
  Parameter parameter() const noexcept { return target_.parameter(); }
  HourStamp start() const noexcept { return target_.start(); }
  std::int64_t start_ordinal() const noexcept { return target_.start_ordinal(); }
  std::size_t hours() const noexcept { return target_.size(); }

  const StationSeries& target() const noexcept { return target_; }
  const StationSeries& input(std::size_t i) const { return inputs_.at(i); }
  const std::vector<StationSeries>& inputs() const noexcept { return inputs_; }
  const StationSeries& series(const std::string& station_id) const;

  StationNetwork with_target(StationSeries target) const;
  StationNetwork with_input(std::size_t i, StationSeries input) const;

  friend bool operator==(const StationNetwork&, const StationNetwork&) = default;

 private:
  friend StationNetwork align_network(const StationSeries&, std::span<const StationSeries>);
  StationSeries target_;
  std::vector<StationSeries> inputs_;
};

/// Pads all seven series with sentinels onto the union hourly index.
StationNetwork align_network(const StationSeries& target, std::span<const StationSeries> inputs);

// CSV ingestion: station_id,year,month,day,hour,parameter,value

struct CsvReadResult {
  std::map<std::string, StationSeries> series;
  std::map<std::string, BuildStats> stats;
};

CsvReadResult read_station_csv(std::istream& in, const std::string& source_name = "<stream>");
CsvReadResult read_station_csv_file(const std::string& path);

void write_station_csv(std::ostream& out, std::span<const StationSeries> series);
void write_station_csv_file(const std::string& path, std::span<const StationSeries> series);

/// Shortest decimal text that parses back to the same double.
std::string format_value(double v);

/// Builds a network from a CSV map given target and ordered input ids.
StationNetwork network_from_csv(const CsvReadResult& csv, const std::string& target_id,
                                const std::vector<std::string>& input_ids);

}  // namespace stationfill
