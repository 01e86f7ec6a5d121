#include "stationfill/features.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "stationfill/error.hpp"
#include "stationfill/random.hpp"

namespace stationfill {

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n(kFeatureCount);
    for (std::size_t s = 0; s < kInputStations; ++s)
      for (std::size_t lag = 0; lag < kLagsPerStation; ++lag) {
        const auto suffix = "s" + std::to_string(s) + "_lag" + std::to_string(lag);
        n[lag_column(s, lag)] = suffix;
        n[lai_column(s, lag)] = "lai_" + suffix;
      }
    n[kDateOffset + 0] = "MM";
    n[kDateOffset + 1] = "DD";
    n[kDateOffset + 2] = "HH";
    return n;
  }();
  return names;
}

std::array<double, kFeatureCount> FeatureRow::to_array() const {
  std::array<double, kFeatureCount> a{};
  std::copy(lags.begin(), lags.end(), a.begin());
  std::copy(date.begin(), date.end(), a.begin() + kDateOffset);
  std::copy(lai.begin(), lai.end(), a.begin() + kLaiOffset);
  return a;
}

std::string_view to_string(MaskPolicy p) {
  switch (p) {
    case MaskPolicy::ZeroAfterStandardize: return "zero_after_standardize";
    case MaskPolicy::StationMean: return "station_mean";
    case MaskPolicy::RawSentinel: return "raw_sentinel";
  }
  return "?";
}

MaskPolicy parse_mask_policy(std::string_view text) {
  if (text == "zero_after_standardize" || text == "ZeroAfterStandardize") return MaskPolicy::ZeroAfterStandardize;
  if (text == "station_mean" || text == "StationMean") return MaskPolicy::StationMean;
  if (text == "raw_sentinel" || text == "RawSentinel") return MaskPolicy::RawSentinel;
  throw Error(ErrorCode::ParseError, "unknown mask policy '" + std::string(text) + "'");
}

namespace {

void fill_row(const StationNetwork& net, std::int64_t h, double* out_lags, double* out_date,
              double* out_lai) {
  for (std::size_t s = 0; s < kInputStations; ++s) {
    const auto& series = net.input(s);
    for (std::size_t lag = 0; lag < kLagsPerStation; ++lag) {
      const double v = series.at_ordinal(h - static_cast<std::int64_t>(lag));
      const auto c = lag_column(s, lag);
      out_lags[c] = v;
      out_lai[c] = is_sentinel(v) ? 0.0 : 1.0;
    }
  }
  const auto stamp = HourStamp::from_ordinal(h);
  out_date[0] = stamp.month;
  out_date[1] = stamp.day;
  out_date[2] = stamp.hour;
}

}  // namespace

std::optional<FeatureRow> assemble_row(const StationNetwork& network, HourStamp h) {
  if (!h.valid()) throw Error(ErrorCode::InvalidStamp, h.to_string());
  const std::int64_t o = h.ordinal();
  const std::int64_t first = network.start_ordinal();
  const std::int64_t last = first + static_cast<std::int64_t>(network.hours()) - 1;
  if (o < first || o > last) return std::nullopt;
  if (o - 2 < first) throw Error(ErrorCode::OutOfIndex, "lags of " + h.to_string() + " precede the index");
  FeatureRow row;
  fill_row(network, o, row.lags.data(), row.date.data(), row.lai.data());
  return row;
}

bool Dataset::row_clean(std::size_t r) const {
  const auto i = static_cast<Eigen::Index>(r);
  for (std::size_t c = kLaiOffset; c < kFeatureCount; ++c)
    if (X(i, static_cast<Eigen::Index>(c)) == 0.0) return false;
  return true;
}

Dataset Dataset::select(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.parameter = parameter;
  out.input_ids = input_ids;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  out.hour_index.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(rows[k]);
    out.X.row(static_cast<Eigen::Index>(k)) = X.row(i);
    out.y(static_cast<Eigen::Index>(k)) = y(i);
    out.hour_index.push_back(hour_index[rows[k]]);
  }
  return out;
}

Dataset build_dataset(const StationNetwork& network) {
  std::vector<std::size_t> keep;
  const auto& target = network.target();
  for (std::size_t h = 2; h < network.hours(); ++h)
    if (!is_sentinel(target[h])) keep.push_back(h);
  if (keep.empty()) throw Error(ErrorCode::EmptyDataset, "no hour with a clean target and available lags");

  Dataset ds;
  ds.parameter = network.parameter();
  ds.input_ids = network.input_ids();
  const auto n = static_cast<Eigen::Index>(keep.size());
  // Row-major scratch so each row is filled contiguously.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(n, kFeatureCount);
  ds.y.resize(n);
  ds.hour_index.reserve(keep.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::int64_t h = network.start_ordinal() + static_cast<std::int64_t>(keep[static_cast<std::size_t>(r)]);
    double* row = rows.row(r).data();
    fill_row(network, h, row, row + kDateOffset, row + kLaiOffset);
    ds.y(r) = target[keep[static_cast<std::size_t>(r)]];
    ds.hour_index.push_back(HourStamp::from_ordinal(h));
  }
  ds.X = rows;
  return ds;
}

TrainTestSplit extract_test_periods(const Dataset& ds, const SplitSpec& spec) {
  std::vector<std::int64_t> ord(ds.rows());
  for (std::size_t r = 0; r < ds.rows(); ++r) ord[r] = ds.hour_index[r].ordinal();

  std::vector<std::pair<std::int64_t, std::int64_t>> spans;
  for (const auto& p : spec.test_periods) {
    if (!p.start.valid() || !p.end.valid() || p.end < p.start)
      throw Error(ErrorCode::InvalidArgument, "test period " + p.start.to_string() + ".." + p.end.to_string());
    const std::int64_t lo = p.start.ordinal();
    const std::int64_t hi = p.end.ordinal();
    for (const auto& [a, b] : spans)
      if (lo <= b && a <= hi) throw Error(ErrorCode::InvalidArgument, "test periods overlap");
    spans.emplace_back(lo, hi);
  }

  std::vector<int> owner(ds.rows(), -1);
  TrainTestSplit out;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto [lo, hi] = spans[k];
    const auto first = std::lower_bound(ord.begin(), ord.end(), lo);
    const auto last = std::upper_bound(ord.begin(), ord.end(), hi);
    const std::string label = spec.test_periods[k].start.to_string() + ".." + spec.test_periods[k].end.to_string();
    if (first == last) throw Error(ErrorCode::PeriodNotFound, label);
    const auto count = static_cast<std::int64_t>(last - first);
    if (count != hi - lo + 1)
      throw Error(ErrorCode::DirtyTestPeriod, label + " has hours with a sentinel target or outside the data");
    std::vector<std::size_t> rows;
    for (auto it = first; it != last; ++it) {
      const auto r = static_cast<std::size_t>(it - ord.begin());
      if (!ds.row_clean(r)) throw Error(ErrorCode::DirtyTestPeriod, label + " contains a sentinel input at " + ds.hour_index[r].to_string());
      owner[r] = static_cast<int>(k);
      rows.push_back(r);
    }
    out.tests.push_back(ds.select(rows));
  }
  std::vector<std::size_t> train_rows;
  for (std::size_t r = 0; r < ds.rows(); ++r)
    if (owner[r] < 0) train_rows.push_back(r);
  out.train = ds.select(train_rows);
  return out;
}

std::array<TestPeriod, 3> suggest_test_periods(const Dataset& ds, std::int64_t len_hours) {
  if (len_hours < 1) throw Error(ErrorCode::InvalidArgument, "window length must be >= 1");
  const std::size_t n = ds.rows();
  const auto L = static_cast<std::size_t>(len_hours);
  if (n < L) throw Error(ErrorCode::NoCleanWindow, "dataset shorter than the window");

  std::vector<std::int64_t> ord(n);
  for (std::size_t r = 0; r < n; ++r) ord[r] = ds.hour_index[r].ordinal();
  // Prefix sums: dirty rows, target, |hour-to-hour change| between adjacent rows.
  std::vector<std::size_t> dirty(n + 1, 0);
  std::vector<double> sum_y(n + 1, 0.0);
  std::vector<double> sum_dy(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    dirty[r + 1] = dirty[r] + (ds.row_clean(r) ? 0 : 1);
    sum_y[r + 1] = sum_y[r] + ds.y(static_cast<Eigen::Index>(r));
    if (r + 1 < n) sum_dy[r + 1] = sum_dy[r] + std::abs(ds.y(static_cast<Eigen::Index>(r + 1)) - ds.y(static_cast<Eigen::Index>(r)));
  }

  struct Window {
    std::size_t start;
    double mean;
    double fluctuation;
  };
  std::vector<Window> windows;
  for (std::size_t s = 0; s + L <= n; ++s) {
    const std::size_t e = s + L - 1;
    if (ord[e] - ord[s] != len_hours - 1) continue;
    if (dirty[e + 1] - dirty[s] != 0) continue;
    const double mean = (sum_y[e + 1] - sum_y[s]) / static_cast<double>(L);
    const double fl = L > 1 ? (sum_dy[e] - sum_dy[s]) / static_cast<double>(L - 1) : 0.0;
    windows.push_back({s, mean, fl});
  }

  std::vector<std::size_t> taken;
  auto disjoint = [&](std::size_t s) {
    return std::all_of(taken.begin(), taken.end(), [&](std::size_t t) { return s + L <= t || t + L <= s; });
  };
  // Candidates in start order; replace only on a clear improvement so ties keep the earliest.
  auto pick = [&](auto score) -> std::size_t {
    const Window* best = nullptr;
    double best_score = 0.0;
    for (const auto& w : windows) {
      if (!disjoint(w.start)) continue;
      const double sc = score(w);
      if (!best || sc > best_score + 1e-9 * (1.0 + std::abs(best_score))) {
        best = &w;
        best_score = sc;
      }
    }
    if (!best) throw Error(ErrorCode::NoCleanWindow, "fewer than three disjoint clean windows");
    taken.push_back(best->start);
    return best->start;
  };
  const std::size_t winter = pick([](const Window& w) { return -w.mean; });
  const std::size_t summer = pick([](const Window& w) { return w.mean; });
  const std::size_t fluct = pick([](const Window& w) { return w.fluctuation; });

  auto period = [&](std::size_t s) { return TestPeriod{ds.hour_index[s], ds.hour_index[s + L - 1]}; };
  return {period(winter), period(summer), period(fluct)};
}

ValidationSplit split_validation(const Dataset& train, const SplitSpec& spec) {
  if (!(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "validation_fraction must be in (0, 1)");
  const std::size_t n = train.rows();
  std::size_t n_val = static_cast<std::size_t>(std::llround(spec.validation_fraction * static_cast<double>(n)));
  if (n > 0) n_val = std::min(n_val, n - 1);
  else n_val = 0;
  Rng rng(spec.rng_seed);
  const auto perm = shuffled_indices(n, rng);
  std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(fit.begin(), fit.end());
  return {train.select(fit), train.select(val)};
}

// ------------------------------------------------------------------ Scaler

namespace {

double clamp_std(double sd, double mean) {
  return sd <= 1e-12 * std::max(1.0, std::abs(mean)) ? 1.0 : sd;
}

bool lag_missing(const Eigen::MatrixXd& X, Eigen::Index r, std::size_t c) {
  return X(r, static_cast<Eigen::Index>(kLaiOffset + c)) == 0.0 || is_sentinel(X(r, static_cast<Eigen::Index>(c)));
}

}  // namespace

Scaler fit_scaler(const Dataset& fit) {
  if (fit.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit a scaler on zero rows");
  if (fit.X.cols() != static_cast<Eigen::Index>(kFeatureCount))
    throw Error(ErrorCode::SchemaMismatch, "expected 39 feature columns");
  Scaler s;
  const Eigen::Index n = fit.X.rows();
  for (std::size_t c = 0; c < kLaiOffset; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    double sum = 0.0;
    std::size_t count = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (c < kLagFeatures && lag_missing(fit.X, r, c)) continue;
      sum += fit.X(r, col);
      ++count;
    }
    if (count == 0) {
      s.mean[c] = 0.0;
      s.stddev[c] = 1.0;
      continue;
    }
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (c < kLagFeatures && lag_missing(fit.X, r, c)) continue;
      const double d = fit.X(r, col) - mean;
      ss += d * d;
    }
    s.mean[c] = mean;
    s.stddev[c] = clamp_std(std::sqrt(ss / static_cast<double>(count)), mean);
  }
  for (std::size_t c = kLaiOffset; c < kFeatureCount; ++c) {
    s.mean[c] = 0.0;
    s.stddev[c] = 1.0;
  }
  s.target_mean = fit.y.mean();
  s.target_std = clamp_std(std::sqrt((fit.y.array() - s.target_mean).square().mean()), s.target_mean);
  return s;
}

Eigen::MatrixXd Scaler::transform(const Eigen::MatrixXd& X, MaskPolicy policy) const {
  if (X.cols() != static_cast<Eigen::Index>(kFeatureCount))
    throw Error(ErrorCode::SchemaMismatch, "expected 39 feature columns, got " + std::to_string(X.cols()));
  Eigen::MatrixXd Z(X.rows(), X.cols());
  std::array<double, kInputStations> station_mean{};
  for (std::size_t st = 0; st < kInputStations; ++st) {
    double m = 0.0;
    for (std::size_t lag = 0; lag < kLagsPerStation; ++lag) m += mean[lag_column(st, lag)];
    station_mean[st] = m / static_cast<double>(kLagsPerStation);
  }
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    if (c >= kLaiOffset) {
      Z.col(col) = X.col(col);
      continue;
    }
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      double v = X(r, col);
      if (c < kLagFeatures && lag_missing(X, r, c)) {
        switch (policy) {
          case MaskPolicy::ZeroAfterStandardize: Z(r, col) = 0.0; continue;
          case MaskPolicy::StationMean: v = station_mean[c / kLagsPerStation]; break;
          case MaskPolicy::RawSentinel: v = kSentinel; break;
        }
      }
      Z(r, col) = (v - mean[c]) / stddev[c];
    }
  }
  return Z;
}

Eigen::MatrixXd Scaler::inverse(const Eigen::MatrixXd& Z) const {
  Eigen::MatrixXd X(Z.rows(), Z.cols());
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    X.col(col) = (Z.col(col).array() * stddev[c] + mean[c]).matrix();
  }
  return X;
}

Eigen::VectorXd Scaler::transform_target(const Eigen::VectorXd& y) const {
  return ((y.array() - target_mean) / target_std).matrix();
}

Eigen::VectorXd Scaler::inverse_target(const Eigen::VectorXd& z) const {
  return (z.array() * target_std + target_mean).matrix();
}

void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  const auto& names = feature_names();
  for (const auto& n : names) out << n << ',';
  out << "target\n";
  for (Eigen::Index r = 0; r < ds.X.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.X.cols(); ++c) out << format_value(ds.X(r, c)) << ',';
    out << format_value(ds.y(r)) << '\n';
  }
}

}  // namespace stationfill
