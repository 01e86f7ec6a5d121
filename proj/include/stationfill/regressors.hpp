#pragma once

// Low-level regressors on already-standardized matrices. Rows are samples.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stationfill {

// ------------------------------------------------------------------- linear

enum class RankPolicy {
  Fail,         // throw SingularSystem on a rank-deficient design
  MinimumNorm,  // minimum-norm least squares (limit of vanishing ridge)
};

struct LinearModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

/// Least squares with intercept via column-pivoted QR.
LinearModel fit_lr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, RankPolicy policy = RankPolicy::Fail);

// --------------------------------------------------------------------- tree

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean target of the node's samples
  std::size_t samples = 0;

  bool leaf() const noexcept { return feature < 0; }
};

/// Nodes in pre-order; node 0 is the root.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  std::size_t depth() const;
  std::size_t leaves() const;
};

struct TreeConfig {
  int min_leaf = 5;
};

/// CART: greedy sum-of-squares split over every feature and every midpoint between
/// consecutive distinct values; ties keep the lowest feature, then the lowest threshold.
RegressionTree fit_rt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeConfig& cfg);

/// Gains closer than this (relative to the node's SSE) count as ties.
inline constexpr double kSplitTieTolerance = 1e-10;

// ------------------------------------------------------------------- forest

struct ForestConfig {
  int n_trees = 30;
  double bootstrap_fraction = 1.0;
  bool bootstrap = true;  // false: every tree sees the full sample once
  int min_leaf = 5;
  std::uint64_t seed = 42;
};

struct Forest {
  std::vector<RegressionTree> trees;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

Forest fit_et(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& cfg);

// ---------------------------------------------------------------------- mlp

/// One tanh hidden layer, linear output. Parameter layout:
/// W1 (hidden x inputs, row-major) | b1 (hidden) | w2 (hidden) | b2.
struct Mlp {
  int inputs = 0;
  int hidden = 0;
  Eigen::VectorXd params;

  static std::size_t param_count(int inputs, int hidden) {
    return static_cast<std::size_t>(hidden) * static_cast<std::size_t>(inputs + 2) + 1;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  /// d output / d params, one row per sample.
  Eigen::MatrixXd jacobian(const Eigen::MatrixXd& X) const;
};

struct NnConfig {
  int hidden_units = 20;
  int max_epochs = 200;
  double lm_lambda0 = 1e-3;
  double lm_decrease = 0.1;
  double lm_increase = 10.0;
  double lm_lambda_max = 1e10;
  int max_validation_failures = 6;
  std::uint64_t seed = 42;
};

struct NnTrace {
  std::vector<double> accepted_sse;  // SSE after each accepted step, preceded by the initial SSE
  std::vector<double> val_mse;       // after each accepted step
  int epochs = 0;
  int accepted = 0;
  int best_step = 0;  // accepted-step count at the restored weights
  std::string stop_reason;
};

Mlp init_mlp(int inputs, int hidden, std::uint64_t seed);

/// Levenberg-Marquardt: solve (J'J + lambda I) d = J'r, accept iff SSE drops.
/// Early stopping on the validation set when it is non-empty.
Mlp fit_nn(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& X_val,
           const Eigen::VectorXd& y_val, const NnConfig& cfg, NnTrace* trace = nullptr);

// ----------------------------------------------------------------------- gp

struct GpConfig {
  double signal_var = 1.0;
  double length_scale = 1.0;
  double noise_var = 0.1;
  std::size_t max_exact_rows = 2000;
  std::uint64_t seed = 42;
};

struct GaussianProcess {
  Eigen::MatrixXd support;  // training inputs actually used
  Eigen::VectorXd alpha;    // (K + noise I)^-1 y
  double signal_var = 1.0;
  double length_scale = 1.0;
  int jitter_steps = 0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

/// Squared-exponential kernel matrix between the rows of A and B.
Eigen::MatrixXd se_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double signal_var,
                          double length_scale);

GaussianProcess fit_gpr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpConfig& cfg);

// ---------------------------------------------------------------------- svr

struct SvrConfig {
  double epsilon = 0.1;
  double C = 1.0;
  int max_passes = 1000;
  double tol = 1e-3;
  std::uint64_t seed = 42;
};

/// Linear epsilon-insensitive SVR. The bias is an extra constant-1 feature.
struct LinearSvr {
  Eigen::VectorXd w;
  double bias = 0.0;
  Eigen::VectorXd dual;  // one coefficient per training row, in [-C, C]
  int passes = 0;
  bool converged = false;
  double max_violation = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  std::size_t support_vectors() const;
};

/// Dual coordinate descent. Not converging within max_passes only logs a warning.
LinearSvr fit_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrConfig& cfg);

double svr_primal_objective(const LinearSvr& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const SvrConfig& cfg);
double svr_dual_objective(const LinearSvr& m, const Eigen::VectorXd& y, const SvrConfig& cfg);

}  // namespace stationfill
