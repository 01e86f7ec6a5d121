#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationfill/features.hpp"
#include "stationfill/regressors.hpp"

namespace stationfill {

enum class RegressorKind { LR, RT, ET, NN, GPR, SVR };

inline constexpr std::array<RegressorKind, 6> kAllKinds = {RegressorKind::LR, RegressorKind::RT, RegressorKind::ET,
                                                           RegressorKind::NN, RegressorKind::GPR, RegressorKind::SVR};

std::string_view to_string(RegressorKind k);
RegressorKind parse_kind(std::string_view text);

struct LrConfig {
  RankPolicy on_singular = RankPolicy::MinimumNorm;
};

struct TrainConfig {
  LrConfig lr;
  TreeConfig rt;
  ForestConfig et;
  NnConfig nn;
  GpConfig gpr;
  SvrConfig svr;
  std::uint64_t rng_seed = 42;

  /// Copies rng_seed into every per-kind seed.
  TrainConfig with_seed(std::uint64_t seed) const;
};

struct Metrics {
  double mse = 0.0;
  double rmse = 0.0;
};

/// MSE = mean squared residual, RMSE = sqrt(MSE).
Metrics metrics(const Eigen::VectorXd& measured, const Eigen::VectorXd& predicted);

struct TrainMetrics {
  double mse = 0.0;
  double rmse = 0.0;
  double throughput_ms_per_sample = 0.0;
  std::size_t fit_rows = 0;
};

using ModelParams = std::variant<LinearModel, RegressionTree, Forest, Mlp, GaussianProcess, LinearSvr>;

struct TrainedModel {
  RegressorKind kind = RegressorKind::LR;
  TrainConfig config;
  Scaler scaler;
  MaskPolicy policy = MaskPolicy::ZeroAfterStandardize;
  std::vector<std::string> station_order;
  Parameter parameter = Parameter::Temperature;
  TrainMetrics metrics;
  ModelParams params;
  NnTrace nn_trace;  // empty unless kind == NN
};

/// Fits one regressor on standardized data; metrics are on the fit set in physical units.
/// NN requires a non-empty validation set for early stopping.
TrainedModel train(RegressorKind kind, const Dataset& fit, const Dataset& val, const TrainConfig& cfg,
                   MaskPolicy policy = MaskPolicy::ZeroAfterStandardize);

/// Predictions in physical units. X holds raw 39-column rows (sentinel lags allowed).
Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& X);
/// Same, after checking the dataset's parameter and station order against the model.
Eigen::VectorXd predict(const TrainedModel& model, const Dataset& ds);

inline constexpr std::string_view kModelFormat = "stationfill-model/1";

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
/// Overlays the keys present in `j` onto `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

}  // namespace stationfill
