#include <Eigen/QR>

#include "stationfill/error.hpp"
#include "stationfill/regressors.hpp"

namespace stationfill {

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& X) const {
  return (X * weights).array() + intercept;
}

LinearModel fit_lr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, RankPolicy policy) {
  if (X.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "fit_lr: X and y row counts differ");
  if (X.rows() == 0) throw Error(ErrorCode::EmptyDataset, "fit_lr: no rows");
  const Eigen::Index d = X.cols();
  Eigen::MatrixXd A(X.rows(), d + 1);
  A.col(0).setOnes();
  A.rightCols(d) = X;

  Eigen::VectorXd beta;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() == d + 1) {
    beta = qr.solve(y);
  } else if (policy == RankPolicy::MinimumNorm) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    cod.setThreshold(1e-10);
    beta = cod.solve(y);
  } else {
    throw Error(ErrorCode::SingularSystem, "design matrix has rank " + std::to_string(qr.rank()) +
                                               " < " + std::to_string(d + 1));
  }
  LinearModel m;
  m.intercept = beta(0);
  m.weights = beta.tail(d);
  return m;
}

}  // namespace stationfill
