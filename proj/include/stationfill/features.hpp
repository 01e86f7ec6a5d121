#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stationfill/timeseries.hpp"

namespace stationfill {

// Column layout of the 39-feature row:
//   [0, 18)   lags, station-major: s{i}_lag2, s{i}_lag1, s{i}_lag0
//   [18, 21)  MM, DD, HH of the target hour
//   [21, 39)  logic anomaly indicators, index-aligned with the lags
inline constexpr std::size_t kLagsPerStation = 3;
inline constexpr std::size_t kLagFeatures = kInputStations * kLagsPerStation;
inline constexpr std::size_t kDateFeatures = 3;
inline constexpr std::size_t kDateOffset = kLagFeatures;
inline constexpr std::size_t kLaiOffset = kLagFeatures + kDateFeatures;
inline constexpr std::size_t kFeatureCount = 2 * kLagFeatures + kDateFeatures;
static_assert(kFeatureCount == 39);

constexpr std::size_t lag_column(std::size_t station, std::size_t lag) noexcept {
  return station * kLagsPerStation + (kLagsPerStation - 1 - lag);
}
constexpr std::size_t lai_column(std::size_t station, std::size_t lag) noexcept {
  return kLaiOffset + lag_column(station, lag);
}

/// Names of the 39 feature columns, in layout order.
const std::vector<std::string>& feature_names();

struct FeatureRow {
  std::array<double, kLagFeatures> lags{};
  std::array<double, kDateFeatures> date{};
  std::array<double, kLagFeatures> lai{};

  std::array<double, kFeatureCount> to_array() const;
};

/// How sentinel lags are rewritten before a model sees them.
enum class MaskPolicy { ZeroAfterStandardize, StationMean, RawSentinel };

std::string_view to_string(MaskPolicy p);
MaskPolicy parse_mask_policy(std::string_view text);

/// Lags keep their raw value (sentinel included); `lai` marks which were sentinel.
/// Returns nullopt when h is outside the index; throws OutOfIndex when h-2 is.
std::optional<FeatureRow> assemble_row(const StationNetwork& network, HourStamp h);

struct Dataset {
  Eigen::MatrixXd X;               // n x 39, raw lags (sentinel where lai == 0)
  Eigen::VectorXd y;               // never sentinel
  std::vector<HourStamp> hour_index;
  Parameter parameter = Parameter::Temperature;
  std::vector<std::string> input_ids;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(y.size()); }
  bool empty() const noexcept { return y.size() == 0; }
  /// True when every lag of row r is present.
  bool row_clean(std::size_t r) const;

  Dataset select(const std::vector<std::size_t>& rows) const;
};

Dataset build_dataset(const StationNetwork& network);

struct TestPeriod {
  HourStamp start;
  HourStamp end;  // inclusive

  std::int64_t hours() const { return end.ordinal() - start.ordinal() + 1; }
};

struct SplitSpec {
  std::vector<TestPeriod> test_periods;
  double validation_fraction = 0.15;
  std::uint64_t rng_seed = 42;
};

struct TrainTestSplit {
  Dataset train;
  std::vector<Dataset> tests;
};

TrainTestSplit extract_test_periods(const Dataset& ds, const SplitSpec& spec);

/// Winter extreme (lowest mean target), summer extreme (highest mean target) and the
/// most fluctuating window, each a clean window of `len_hours`, mutually disjoint.
std::array<TestPeriod, 3> suggest_test_periods(const Dataset& ds, std::int64_t len_hours);

struct ValidationSplit {
  Dataset fit;
  Dataset val;
};

ValidationSplit split_validation(const Dataset& train, const SplitSpec& spec);

/// Per-column z-score; LAI columns pass through, lag statistics ignore sentinels.
struct Scaler {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};
  double target_mean = 0.0;
  double target_std = 1.0;

  /// Standardizes X and rewrites sentinel lags per `policy`.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& X, MaskPolicy policy) const;
  Eigen::VectorXd transform_target(const Eigen::VectorXd& y) const;
  Eigen::VectorXd inverse_target(const Eigen::VectorXd& z) const;
  /// Inverse of `transform` for sentinel-free rows.
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& Z) const;
};

Scaler fit_scaler(const Dataset& fit);

void write_dataset_csv(std::ostream& out, const Dataset& ds);

}  // namespace stationfill
