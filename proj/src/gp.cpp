#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "stationfill/error.hpp"
#include "stationfill/log.hpp"
#include "stationfill/random.hpp"
#include "stationfill/regressors.hpp"

namespace stationfill {

Eigen::MatrixXd se_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double signal_var,
                          double length_scale) {
  const Eigen::VectorXd an = A.rowwise().squaredNorm();
  const Eigen::VectorXd bn = B.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (A * B.transpose());
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  return (signal_var * (-(d2.array().max(0.0)) * inv).exp()).matrix();
}

Eigen::VectorXd GaussianProcess::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  constexpr Eigen::Index kBlock = 1024;
  for (Eigen::Index b = 0; b < X.rows(); b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, X.rows() - b);
    out.segment(b, rows) = se_kernel(X.middleRows(b, rows), support, signal_var, length_scale) * alpha;
  }
  return out;
}

GaussianProcess fit_gpr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpConfig& cfg) {
  if (X.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "fit_gpr: X and y row counts differ");
  if (X.rows() == 0) throw Error(ErrorCode::EmptyDataset, "fit_gpr: no rows");
  if (!(cfg.signal_var > 0) || !(cfg.length_scale > 0) || !(cfg.noise_var >= 0) || cfg.max_exact_rows < 1)
    throw Error(ErrorCode::InvalidArgument, "fit_gpr: invalid configuration");

  GaussianProcess gp;
  gp.signal_var = cfg.signal_var;
  gp.length_scale = cfg.length_scale;
  Eigen::VectorXd targets;
  const auto n = static_cast<std::size_t>(X.rows());
  if (n > cfg.max_exact_rows) {
    Rng rng(cfg.seed);
    auto idx = shuffled_indices(n, rng);
    idx.resize(cfg.max_exact_rows);
    std::sort(idx.begin(), idx.end());
    gp.support.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
    targets.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      gp.support.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(idx[k]));
      targets(static_cast<Eigen::Index>(k)) = y(static_cast<Eigen::Index>(idx[k]));
    }
  } else {
    gp.support = X;
    targets = y;
  }

  Eigen::MatrixXd K = se_kernel(gp.support, gp.support, cfg.signal_var, cfg.length_scale);
  K.diagonal().array() += cfg.noise_var;
  constexpr double kJitter = 1e-8;
  constexpr int kMaxJitterSteps = 3;
  for (int step = 0;; ++step) {
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() == Eigen::Success) {
      gp.alpha = llt.solve(targets);
      gp.jitter_steps = step;
      break;
    }
    if (step == kMaxJitterSteps)
      throw Error(ErrorCode::CholeskyFailure, "kernel matrix not positive definite after jitter");
    K.diagonal().array() += kJitter;
  }
  if (gp.jitter_steps > 0) log_warn("fit_gpr: added jitter " + std::to_string(gp.jitter_steps) + " time(s)");
  return gp;
}

}  // namespace stationfill
