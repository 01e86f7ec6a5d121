#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "stationfill/error.hpp"
#include "stationfill/log.hpp"
#include "stationfill/random.hpp"
#include "stationfill/regressors.hpp"

namespace stationfill {

namespace {

struct Views {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W1;
  Eigen::Map<const Eigen::VectorXd> b1;
  Eigen::Map<const Eigen::VectorXd> w2;
  double b2;
};

Views views(const Eigen::VectorXd& p, int inputs, int hidden) {
  const double* d = p.data();
  const std::size_t w1 = static_cast<std::size_t>(hidden) * static_cast<std::size_t>(inputs);
  return Views{{d, hidden, inputs}, {d + w1, hidden}, {d + w1 + hidden, hidden}, d[w1 + 2 * static_cast<std::size_t>(hidden)]};
}

// Rows processed per Jacobian block when accumulating J'J.
constexpr Eigen::Index kBlock = 512;

Eigen::MatrixXd hidden_activations(const Views& v, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  Eigen::MatrixXd A = X * v.W1.transpose();
  A.rowwise() += v.b1.transpose();
  return A.array().tanh().matrix();
}

void jacobian_block(const Views& v, const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::MatrixXd& H,
                    Eigen::Ref<Eigen::MatrixXd> J) {
  const Eigen::Index d = X.cols();
  const Eigen::Index h = H.cols();
  for (Eigen::Index j = 0; j < h; ++j) {
    const Eigen::VectorXd g = v.w2(j) * (1.0 - H.col(j).array().square());
    J.middleCols(j * d, d) = g.asDiagonal() * X;
    J.col(h * d + j) = g;
    J.col(h * d + h + j) = H.col(j);
  }
  J.col(h * d + 2 * h).setOnes();
}

struct Normal {
  Eigen::MatrixXd JtJ;  // lower triangle valid
  Eigen::VectorXd Jtr;
  double sse = 0.0;
};

/// Accumulates J'J, J'r and SSE blockwise, never holding the full Jacobian.
Normal normal_equations(const Mlp& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto P = static_cast<Eigen::Index>(m.params.size());
  const Views v = views(m.params, m.inputs, m.hidden);
  Normal ne;
  ne.JtJ = Eigen::MatrixXd::Zero(P, P);
  ne.Jtr = Eigen::VectorXd::Zero(P);
  Eigen::MatrixXd J;
  for (Eigen::Index b = 0; b < X.rows(); b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, X.rows() - b);
    const auto Xb = X.middleRows(b, rows);
    const Eigen::MatrixXd H = hidden_activations(v, Xb);
    const Eigen::VectorXd r = y.segment(b, rows) - ((H * v.w2).array() + v.b2).matrix();
    J.resize(rows, P);
    jacobian_block(v, Xb, H, J);
    if (!J.allFinite() || !r.allFinite())
      throw Error(ErrorCode::JacobianNonFinite, "non-finite Jacobian or residual in rows " + std::to_string(b) +
                                                    ".." + std::to_string(b + rows - 1));
    ne.JtJ.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
    ne.Jtr.noalias() += J.transpose() * r;
    ne.sse += r.squaredNorm();
  }
  return ne;
}

double sse_of(const Mlp& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return (y - m.predict(X)).squaredNorm();
}

}  // namespace

Eigen::VectorXd Mlp::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != inputs) throw Error(ErrorCode::SchemaMismatch, "mlp: wrong input width");
  const Views v = views(params, inputs, hidden);
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index b = 0; b < X.rows(); b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, X.rows() - b);
    const Eigen::MatrixXd H = hidden_activations(v, X.middleRows(b, rows));
    out.segment(b, rows) = (H * v.w2).array() + v.b2;
  }
  return out;
}

Eigen::MatrixXd Mlp::jacobian(const Eigen::MatrixXd& X) const {
  const Views v = views(params, inputs, hidden);
  Eigen::MatrixXd J(X.rows(), static_cast<Eigen::Index>(params.size()));
  const Eigen::MatrixXd H = hidden_activations(v, X);
  jacobian_block(v, X, H, J);
  return J;
}

Mlp init_mlp(int inputs, int hidden, std::uint64_t seed) {
  if (inputs < 1 || hidden < 1) throw Error(ErrorCode::InvalidArgument, "mlp: inputs and hidden must be >= 1");
  Mlp m;
  m.inputs = inputs;
  m.hidden = hidden;
  m.params.resize(static_cast<Eigen::Index>(Mlp::param_count(inputs, hidden)));
  Rng rng(seed);
  const double a1 = 1.0 / std::sqrt(static_cast<double>(inputs));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  const Eigen::Index first_layer = static_cast<Eigen::Index>(hidden) * (inputs + 1);
  for (Eigen::Index i = 0; i < m.params.size(); ++i) {
    const double a = i < first_layer ? a1 : a2;
    m.params(i) = uniform(rng, -a, a);
  }
  return m;
}

Mlp fit_nn(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& X_val,
           const Eigen::VectorXd& y_val, const NnConfig& cfg, NnTrace* trace) {
  if (X.rows() != y.size() || X_val.rows() != y_val.size())
    throw Error(ErrorCode::LengthMismatch, "fit_nn: X and y row counts differ");
  if (X.rows() == 0) throw Error(ErrorCode::EmptyDataset, "fit_nn: no rows");
  if (X_val.rows() > 0 && X_val.cols() != X.cols())
    throw Error(ErrorCode::SchemaMismatch, "fit_nn: validation width differs");
  if (cfg.max_epochs < 0 || cfg.hidden_units < 1 || !(cfg.lm_lambda0 > 0) || !(cfg.lm_decrease > 0 && cfg.lm_decrease < 1) ||
      !(cfg.lm_increase > 1) || cfg.max_validation_failures < 1)
    throw Error(ErrorCode::InvalidArgument, "fit_nn: invalid configuration");

  NnTrace local;
  NnTrace& tr = trace ? *trace : local;
  tr = NnTrace{};

  Mlp m = init_mlp(static_cast<int>(X.cols()), cfg.hidden_units, cfg.seed);
  const bool early_stopping = X_val.rows() > 0;
  auto val_mse = [&](const Mlp& net) { return (y_val - net.predict(X_val)).squaredNorm() / static_cast<double>(y_val.size()); };

  Normal ne = normal_equations(m, X, y);
  tr.accepted_sse.push_back(ne.sse);
  double lambda = cfg.lm_lambda0;
  Eigen::VectorXd best = m.params;
  double best_val = early_stopping ? val_mse(m) : 0.0;
  int failures = 0;
  tr.stop_reason = "max_epochs";

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    tr.epochs = epoch;
    if (ne.sse == 0.0 || ne.Jtr.lpNorm<Eigen::Infinity>() < 1e-14) {
      tr.stop_reason = "converged";
      break;
    }
    Eigen::MatrixXd A = ne.JtJ;
    A.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(A);
    bool accepted = false;
    if (llt.info() == Eigen::Success) {
      Mlp candidate = m;
      candidate.params += llt.solve(ne.Jtr);
      const double sse = sse_of(candidate, X, y);
      if (std::isfinite(sse) && sse < ne.sse) {
        m = std::move(candidate);
        accepted = true;
      }
    }
    if (!accepted) {
      lambda *= cfg.lm_increase;
      if (lambda > cfg.lm_lambda_max) {
        tr.stop_reason = "lambda_max";
        break;
      }
      continue;
    }
    lambda = std::max(lambda * cfg.lm_decrease, 1e-20);
    ne = normal_equations(m, X, y);
    ++tr.accepted;
    tr.accepted_sse.push_back(ne.sse);
    if (early_stopping) {
      const double v = val_mse(m);
      tr.val_mse.push_back(v);
      if (v < best_val) {
        best_val = v;
        best = m.params;
        tr.best_step = tr.accepted;
        failures = 0;
      } else if (++failures >= cfg.max_validation_failures) {
        tr.stop_reason = "validation";
        break;
      }
    }
  }
  if (early_stopping) {
    m.params = best;
  } else {
    tr.best_step = tr.accepted;
  }
  return m;
}

}  // namespace stationfill
