#include <algorithm>
#include <cmath>

#include "stationfill/error.hpp"
#include "stationfill/log.hpp"
#include "stationfill/random.hpp"
#include "stationfill/regressors.hpp"

namespace stationfill {

Eigen::VectorXd LinearSvr::predict(const Eigen::MatrixXd& X) const {
  return (X * w).array() + bias;
}

std::size_t LinearSvr::support_vectors() const {
  return static_cast<std::size_t>((dual.array() != 0.0).count());
}

// Dual of min 1/2 |w|^2 + C sum max(0, |y - w.x| - eps) with x augmented by a
// constant 1:  min_beta 1/2 beta'Q beta - y'beta + eps |beta|_1,  -C <= beta <= C,
// w = sum beta_i x_i. One coordinate at a time, closed form per coordinate.
LinearSvr fit_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrConfig& cfg) {
  if (X.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "fit_svr: X and y row counts differ");
  if (X.rows() == 0) throw Error(ErrorCode::EmptyDataset, "fit_svr: no rows");
  if (!(cfg.C > 0) || !(cfg.epsilon >= 0) || cfg.max_passes < 1 || !(cfg.tol > 0))
    throw Error(ErrorCode::InvalidArgument, "fit_svr: invalid configuration");

  const auto n = static_cast<std::size_t>(X.rows());
  const double C = cfg.C;
  const double eps = cfg.epsilon;
  LinearSvr m;
  m.w = Eigen::VectorXd::Zero(X.cols());
  m.dual = Eigen::VectorXd::Zero(X.rows());
  const Eigen::VectorXd qdiag = (X.rowwise().squaredNorm().array() + 1.0).matrix();

  Rng rng(cfg.seed);
  for (int pass = 1; pass <= cfg.max_passes; ++pass) {
    m.passes = pass;
    const auto order = shuffled_indices(n, rng);
    double violation = 0.0;
    for (std::size_t k : order) {
      const auto i = static_cast<Eigen::Index>(k);
      const double beta = m.dual(i);
      const double g = X.row(i).dot(m.w) + m.bias - y(i);
      const double gp = g + eps;
      const double gn = g - eps;
      const double H = qdiag(i);

      double v;
      if (beta == 0.0) v = gp < 0.0 ? -gp : (gn > 0.0 ? gn : 0.0);
      else if (beta >= C) v = std::max(0.0, gp);
      else if (beta <= -C) v = std::max(0.0, -gn);
      else if (beta > 0.0) v = std::abs(gp);
      else v = std::abs(gn);
      violation = std::max(violation, v);

      double target;
      if (gp < H * beta) target = beta - gp / H;
      else if (gn > H * beta) target = beta - gn / H;
      else target = 0.0;
      target = std::clamp(target, -C, C);
      const double d = target - beta;
      if (d != 0.0) {
        m.dual(i) = target;
        m.w.noalias() += d * X.row(i).transpose();
        m.bias += d;
      }
    }
    m.max_violation = violation;
    if (violation < cfg.tol) {
      m.converged = true;
      break;
    }
  }
  if (!m.converged)
    log_warn("fit_svr: NonConvergence after " + std::to_string(m.passes) + " passes (max KKT violation " +
             std::to_string(m.max_violation) + "), keeping best-so-far");
  return m;
}

double svr_primal_objective(const LinearSvr& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const SvrConfig& cfg) {
  const Eigen::ArrayXd loss = ((y - m.predict(X)).array().abs() - cfg.epsilon).max(0.0);
  return 0.5 * (m.w.squaredNorm() + m.bias * m.bias) + cfg.C * loss.sum();
}

double svr_dual_objective(const LinearSvr& m, const Eigen::VectorXd& y, const SvrConfig& cfg) {
  return y.dot(m.dual) - cfg.epsilon * m.dual.lpNorm<1>() - 0.5 * (m.w.squaredNorm() + m.bias * m.bias);
}

}  // namespace stationfill
