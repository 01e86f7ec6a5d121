#include "stationfill/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "stationfill/error.hpp"
#include "stationfill/log.hpp"

namespace stationfill {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidStamp: return "InvalidStamp";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::ParameterMismatch: return "ParameterMismatch";
    case ErrorCode::WrongInputCount: return "WrongInputCount";
    case ErrorCode::EmptyNetwork: return "EmptyNetwork";
    case ErrorCode::OutOfIndex: return "OutOfIndex";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DirtyTestPeriod: return "DirtyTestPeriod";
    case ErrorCode::PeriodNotFound: return "PeriodNotFound";
    case ErrorCode::NoCleanWindow: return "NoCleanWindow";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::CholeskyFailure: return "CholeskyFailure";
    case ErrorCode::JacobianNonFinite: return "JacobianNonFinite";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::GapTooLong: return "GapTooLong";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ModelUnavailable: return "ModelUnavailable";
  }
  return "Unknown";
}

// ---------------------------------------------------------------- HourStamp

namespace {

std::chrono::year_month_day ymd_of(const HourStamp& s) {
  return std::chrono::year_month_day{std::chrono::year{s.year},
                                     std::chrono::month{static_cast<unsigned>(s.month)},
                                     std::chrono::day{static_cast<unsigned>(s.day)}};
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

bool HourStamp::valid() const noexcept {
  if (hour < 0 || hour > 23 || month < 1 || month > 12 || day < 1 || day > 31) return false;
  return ymd_of(*this).ok();
}

std::int64_t HourStamp::ordinal() const noexcept {
  const auto days = std::chrono::sys_days{ymd_of(*this)}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 24 + hour;
}

HourStamp HourStamp::from_ordinal(std::int64_t hours) noexcept {
  const std::int64_t days = floor_div(hours, 24);
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  return HourStamp{static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
                   static_cast<int>(static_cast<unsigned>(ymd.day())),
                   static_cast<int>(hours - days * 24)};
}

std::string HourStamp::to_string() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d", year, month, day, hour);
  return buf;
}

HourStamp HourStamp::parse(std::string_view text) {
  HourStamp s;
  int* fields[] = {&s.year, &s.month, &s.day, &s.hour};
  std::size_t pos = 0;
  for (int f = 0; f < 4; ++f) {
    if (f > 0) {
      if (pos >= text.size() || (text[pos] != '-' && text[pos] != 'T' && text[pos] != ' '))
        throw Error(ErrorCode::InvalidStamp, "cannot parse '" + std::string(text) + "'");
      ++pos;
    }
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), *fields[f]);
    if (ec != std::errc{}) throw Error(ErrorCode::InvalidStamp, "cannot parse '" + std::string(text) + "'");
    pos = static_cast<std::size_t>(ptr - text.data());
  }
  if (pos != text.size() || !s.valid())
    throw Error(ErrorCode::InvalidStamp, "invalid stamp '" + std::string(text) + "'");
  return s;
}

// ---------------------------------------------------------------- Parameter

std::string_view to_string(Parameter p) {
  return p == Parameter::Temperature ? "T" : "RH";
}

Parameter parse_parameter(std::string_view text) {
  if (text == "T" || text == "Temperature" || text == "temperature") return Parameter::Temperature;
  if (text == "RH" || text == "RelativeHumidity" || text == "relative_humidity")
    return Parameter::RelativeHumidity;
  throw Error(ErrorCode::ParseError, "unknown parameter '" + std::string(text) + "'");
}

PlausibleRange plausible_range(Parameter p) noexcept {
  return p == Parameter::Temperature ? PlausibleRange{-30.0, 50.0} : PlausibleRange{0.0, 100.0};
}

PlausibleRange raw_range(Parameter p) noexcept {
  return p == Parameter::Temperature ? PlausibleRange{-100.0, 100.0} : PlausibleRange{-100.0, 200.0};
}

// ------------------------------------------------------------ StationSeries

StationSeries::StationSeries(std::string station_id, Parameter parameter, HourStamp start,
                             std::vector<double> values)
    : station_id_(std::move(station_id)),
      parameter_(parameter),
      start_(start),
      values_(std::move(values)) {
  if (!start_.valid()) throw Error(ErrorCode::InvalidStamp, start_.to_string());
  start_ordinal_ = start_.ordinal();
  const auto range = raw_range(parameter_);
  for (double v : values_) {
    if (is_sentinel(v)) continue;
    if (!std::isfinite(v) || v < range.min || v > range.max)
      throw Error(ErrorCode::InvalidValue,
                  "station " + station_id_ + " holds non-sentinel value outside raw range");
  }
}

double StationSeries::at_ordinal(std::int64_t hour) const noexcept {
  const std::int64_t i = hour - start_ordinal_;
  if (i < 0 || i >= static_cast<std::int64_t>(values_.size())) return kSentinel;
  return values_[static_cast<std::size_t>(i)];
}

std::size_t StationSeries::sentinel_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), is_sentinel));
}

StationSeries StationSeries::with_values(std::vector<double> values) const {
  return StationSeries(station_id_, parameter_, start_, std::move(values));
}

StationSeries build_series(std::span<const HourRecord> records, const std::string& station_id,
                           Parameter parameter, BuildStats* stats) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no records for station " + station_id);
  BuildStats local;
  std::int64_t lo = INT64_MAX;
  std::int64_t hi = INT64_MIN;
  for (const auto& r : records) {
    if (!r.stamp.valid()) throw Error(ErrorCode::InvalidStamp, r.stamp.to_string());
    if (!is_sentinel(r.value) && !std::isfinite(r.value))
      throw Error(ErrorCode::InvalidValue, "non-finite value at " + r.stamp.to_string());
    const auto o = r.stamp.ordinal();
    lo = std::min(lo, o);
    hi = std::max(hi, o);
  }
  const auto n = static_cast<std::size_t>(hi - lo + 1);
  std::vector<double> values(n, kSentinel);
  std::vector<bool> seen(n, false);
  const auto range = raw_range(parameter);
  for (const auto& r : records) {
    const auto i = static_cast<std::size_t>(r.stamp.ordinal() - lo);
    if (seen[i]) {
      ++local.duplicates;
      log_warn("station " + station_id + ": duplicate stamp " + r.stamp.to_string() +
               ", keeping last record");
    }
    seen[i] = true;
    double v = r.value;
    if (!is_sentinel(v) && (v < range.min || v > range.max)) {
      ++local.out_of_raw_range;
      v = kSentinel;
    }
    values[i] = v;
  }
  local.gap_hours = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false));
  if (stats) *stats = local;
  return StationSeries(station_id, parameter, HourStamp::from_ordinal(lo), std::move(values));
}

// ----------------------------------------------------------- StationNetwork

std::vector<std::string> StationNetwork::input_ids() const {
  std::vector<std::string> ids;
  ids.reserve(inputs_.size());
  for (const auto& s : inputs_) ids.push_back(s.station_id());
  return ids;
}

const StationSeries& StationNetwork::series(const std::string& station_id) const {
  if (target_.station_id() == station_id) return target_;
  for (const auto& s : inputs_)
    if (s.station_id() == station_id) return s;
  throw Error(ErrorCode::InvalidArgument, "unknown station " + station_id);
}

namespace {

void require_same_index(const StationSeries& a, const StationSeries& b) {
  if (a.start() != b.start() || a.size() != b.size())
    throw Error(ErrorCode::InvalidArgument, "replacement series must keep the network index");
  if (a.parameter() != b.parameter()) throw Error(ErrorCode::ParameterMismatch, b.station_id());
}

}  // namespace

StationNetwork StationNetwork::with_target(StationSeries target) const {
  require_same_index(target_, target);
  StationNetwork copy = *this;
  copy.target_ = std::move(target);
  return copy;
}

StationNetwork StationNetwork::with_input(std::size_t i, StationSeries input) const {
  require_same_index(inputs_.at(i), input);
  StationNetwork copy = *this;
  copy.inputs_[i] = std::move(input);
  return copy;
}

StationNetwork align_network(const StationSeries& target, std::span<const StationSeries> inputs) {
  if (inputs.size() != kInputStations)
    throw Error(ErrorCode::WrongInputCount,
                "expected 6 input stations, got " + std::to_string(inputs.size()));
  std::int64_t lo = target.start_ordinal();
  std::int64_t hi = lo + static_cast<std::int64_t>(target.size()) - 1;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& s = inputs[i];
    if (s.parameter() != target.parameter())
      throw Error(ErrorCode::ParameterMismatch, "station " + s.station_id());
    if (s.station_id() == target.station_id())
      throw Error(ErrorCode::InvalidArgument, "target " + s.station_id() + " listed as input");
    for (std::size_t j = 0; j < i; ++j)
      if (inputs[j].station_id() == s.station_id())
        throw Error(ErrorCode::InvalidArgument, "duplicate input station " + s.station_id());
    lo = std::min(lo, s.start_ordinal());
    hi = std::max(hi, s.start_ordinal() + static_cast<std::int64_t>(s.size()) - 1);
  }
  auto pad = [lo, hi](const StationSeries& s) {
    if (s.start_ordinal() == lo && static_cast<std::int64_t>(s.size()) == hi - lo + 1) return s;
    std::vector<double> v(static_cast<std::size_t>(hi - lo + 1), kSentinel);
    const auto off = static_cast<std::size_t>(s.start_ordinal() - lo);
    std::copy(s.values().begin(), s.values().end(), v.begin() + static_cast<std::ptrdiff_t>(off));
    return StationSeries(s.station_id(), s.parameter(), HourStamp::from_ordinal(lo), std::move(v));
  };
  StationNetwork net;
  net.target_ = pad(target);
  for (const auto& s : inputs) net.inputs_.push_back(pad(s));
  return net;
}

// --------------------------------------------------------------------- CSV

std::string format_value(double v) {
  if (is_sentinel(v)) return "-999";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, const std::string& where) {
  T v{};
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw Error(ErrorCode::ParseError, where + ": bad number '" + std::string(text) + "'");
  return v;
}

}  // namespace

CsvReadResult read_station_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  struct Pending {
    Parameter parameter;
    std::vector<HourRecord> records;
  };
  std::map<std::string, Pending> pending;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.empty()) continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    const auto f = split_fields(line);
    if (!header_seen) {
      static constexpr std::string_view expected[] = {"station_id", "year",      "month", "day",
                                                      "hour",       "parameter", "value"};
      if (f.size() < 7) throw Error(ErrorCode::ParseError, where + ": header row required");
      for (std::size_t i = 0; i < 7; ++i)
        if (f[i] != expected[i])
          throw Error(ErrorCode::ParseError, where + ": unexpected header column '" + std::string(f[i]) + "'");
      header_seen = true;
      continue;
    }
    if (f.size() < 7) throw Error(ErrorCode::ParseError, where + ": expected 7 fields");
    if (f[0].empty()) throw Error(ErrorCode::ParseError, where + ": empty station_id");
    HourStamp s{parse_number<int>(f[1], where), parse_number<int>(f[2], where),
                parse_number<int>(f[3], where), parse_number<int>(f[4], where)};
    if (!s.valid()) throw Error(ErrorCode::ParseError, where + ": invalid date/hour");
    Parameter p;
    try {
      p = parse_parameter(f[5]);
    } catch (const Error&) {
      throw Error(ErrorCode::ParseError, where + ": unknown parameter '" + std::string(f[5]) + "'");
    }
    const double v = parse_number<double>(f[6], where);
    if (!std::isfinite(v)) throw Error(ErrorCode::ParseError, where + ": non-finite value");
    auto [it, inserted] = pending.try_emplace(std::string(f[0]), Pending{p, {}});
    if (!inserted && it->second.parameter != p)
      throw Error(ErrorCode::ParseError, where + ": station " + it->first + " mixes parameters");
    it->second.records.push_back({s, v});
  }
  if (!header_seen) throw Error(ErrorCode::ParseError, source_name + ": empty file, header row required");
  CsvReadResult result;
  for (auto& [id, p] : pending) {
    BuildStats st;
    result.series.emplace(id, build_series(p.records, id, p.parameter, &st));
    result.stats.emplace(id, st);
  }
  return result;
}

CsvReadResult read_station_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_station_csv(in, path);
}

void write_station_csv(std::ostream& out, std::span<const StationSeries> series) {
  out << "station_id,year,month,day,hour,parameter,value\n";
  for (const auto& s : series) {
    const auto p = to_string(s.parameter());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto h = HourStamp::from_ordinal(s.start_ordinal() + static_cast<std::int64_t>(i));
      out << s.station_id() << ',' << h.year << ',' << h.month << ',' << h.day << ',' << h.hour << ','
          << p << ',' << format_value(s[i]) << '\n';
    }
  }
}

void write_station_csv_file(const std::string& path, std::span<const StationSeries> series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_station_csv(out, series);
}

StationNetwork network_from_csv(const CsvReadResult& csv, const std::string& target_id,
                                const std::vector<std::string>& input_ids) {
  auto find = [&](const std::string& id) -> const StationSeries& {
    auto it = csv.series.find(id);
    if (it == csv.series.end()) throw Error(ErrorCode::EmptyInput, "station " + id + " not in input");
    return it->second;
  };
  std::vector<StationSeries> inputs;
  for (const auto& id : input_ids) inputs.push_back(find(id));
  return align_network(find(target_id), inputs);
}

}  // namespace stationfill
