#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "stationfill/error.hpp"
#include "stationfill/log.hpp"
#include "stationfill/models.hpp"

using namespace stationfill;
using fixtures::random_matrix;
using fixtures::random_vector;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

void check_same_tree(const RegressionTree& t, const std::vector<oracle::Node>& o) {
  REQUIRE(t.nodes.size() == o.size());
  for (std::size_t i = 0; i < o.size(); ++i) {
    CHECK(t.nodes[i].feature == o[i].feature);
    if (o[i].feature >= 0) {
      CHECK(t.nodes[i].threshold == o[i].threshold);
      CHECK(t.nodes[i].left == o[i].left);
      CHECK(t.nodes[i].right == o[i].right);
    }
    CHECK(t.nodes[i].value == doctest::Approx(o[i].value).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("metrics") {
  auto m = metrics(Eigen::Vector2d(2, 4), Eigen::Vector2d(1, 2));
  CHECK(m.mse == 2.5);
  CHECK(m.rmse == doctest::Approx(1.5811388300841898));
  auto z = metrics(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3));
  CHECK(z.mse == 0.0);
  CHECK(z.rmse == 0.0);
  auto one = metrics(Eigen::Vector4d(1, 2, 3, 4), Eigen::Vector4d(2, 1, 4, 3));
  CHECK(one.mse == 1.0);
  CHECK(one.rmse == 1.0);
  CHECK(code_of([] { metrics(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3)); }) == ErrorCode::LengthMismatch);
  CHECK(code_of([] { metrics(Eigen::VectorXd(), Eigen::VectorXd()); }) == ErrorCode::EmptyInput);
  // exact prediction is the unique minimum among perturbations
  Rng rng(2);
  const Eigen::VectorXd y = random_vector(rng, 20);
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd p = y + 1e-3 * random_vector(rng, 20);
    CHECK(metrics(y, p).mse > metrics(y, y).mse);
  }
}

TEST_CASE("linear regression") {
  SUBCASE("exact linear data") {
    Eigen::MatrixXd X(3, 2);
    X << 1, 0, 0, 1, 1, 1;
    const Eigen::Vector3d y(2, 3, 5);
    auto m = fit_lr(X, y);
    CHECK(m.weights(0) == doctest::Approx(2.0));
    CHECK(m.weights(1) == doctest::Approx(3.0));
    CHECK(std::abs(m.intercept) < 1e-12);
  }
  SUBCASE("pseudo-inverse oracle and orthogonal residuals") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::MatrixXd X = random_matrix(rng, 5 + static_cast<Eigen::Index>(uniform_index(rng, 20)), 3);
      const Eigen::VectorXd y = random_vector(rng, X.rows(), -5, 5);
      auto m = fit_lr(X, y);
      const auto beta = oracle::least_squares(X, y);
      CHECK(std::abs(m.intercept - beta[0]) < 1e-8);
      for (int j = 0; j < 3; ++j) CHECK(std::abs(m.weights(j) - beta[static_cast<std::size_t>(j) + 1]) < 1e-8);
      const Eigen::VectorXd r = y - m.predict(X);
      CHECK((X.transpose() * r).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(std::abs(r.sum()) < 1e-8);
    }
  }
  SUBCASE("collinear columns") {
    Rng rng(4);
    Eigen::MatrixXd X = random_matrix(rng, 10, 3);
    X.col(2) = 2.0 * X.col(0);
    const Eigen::VectorXd y = random_vector(rng, 10);
    CHECK(code_of([&] { fit_lr(X, y, RankPolicy::Fail); }) == ErrorCode::SingularSystem);
    auto m = fit_lr(X, y, RankPolicy::MinimumNorm);
    const Eigen::VectorXd r = y - m.predict(X);
    CHECK((X.transpose() * r).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("regression tree") {
  SUBCASE("one-dimensional split") {
    Eigen::MatrixXd X(4, 1);
    X << 0, 1, 10, 11;
    auto t = fit_rt(X, Eigen::Vector4d(0, 0, 5, 5), {1});
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold == 5.5);
    CHECK(t.nodes[1].value == 0.0);
    CHECK(t.nodes[2].value == 5.0);
  }
  SUBCASE("constant target is a single leaf") {
    Rng rng(1);
    auto t = fit_rt(random_matrix(rng, 12, 2), Eigen::VectorXd::Constant(12, 3.0), {1});
    CHECK(t.nodes.size() == 1);
    CHECK(t.nodes[0].value == 3.0);
  }
  SUBCASE("equals the exhaustive oracle") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
      const auto n = 2 + static_cast<Eigen::Index>(uniform_index(rng, 19));
      const auto d = 1 + static_cast<Eigen::Index>(uniform_index(rng, 3));
      Eigen::MatrixXd X = random_matrix(rng, n, d);
      Eigen::VectorXd y = random_vector(rng, n);
      if (trial % 2 == 0) {  // coarse grids create ties in both X and gains
        X = (X * 2.0).array().round();
        y = (y * 2.0).array().round();
      }
      const int min_leaf = 1 + static_cast<int>(uniform_index(rng, 3));
      auto t = fit_rt(X, y, {min_leaf});
      std::vector<int> rows(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), 0);
      std::vector<oracle::Node> ref;
      oracle::build_tree(X, y, rows, static_cast<std::size_t>(min_leaf), kSplitTieTolerance, ref);
      check_same_tree(t, ref);
      const Eigen::VectorXd p = t.predict(X);
      for (Eigen::Index r = 0; r < n; ++r) {
        int i = 0;
        while (ref[static_cast<std::size_t>(i)].feature >= 0) {
          const auto& node = ref[static_cast<std::size_t>(i)];
          i = X(r, node.feature) <= node.threshold ? node.left : node.right;
        }
        CHECK(p(r) == doctest::Approx(ref[static_cast<std::size_t>(i)].value).epsilon(1e-12));
        CHECK(p(r) >= y.minCoeff() - 1e-12);
        CHECK(p(r) <= y.maxCoeff() + 1e-12);
      }
    }
  }
  SUBCASE("min_leaf 1 memorises distinct rows") {
    Rng rng(8);
    const Eigen::MatrixXd X = random_matrix(rng, 40, 3);
    const Eigen::VectorXd y = random_vector(rng, 40);
    auto t = fit_rt(X, y, {1});
    CHECK((t.predict(X) - y).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("bagged trees") {
  Rng rng(6);
  const Eigen::MatrixXd X = random_matrix(rng, 80, 4);
  const Eigen::VectorXd y = (X.col(0).array() * 3.0).sin().matrix() + 0.1 * random_vector(rng, 80);
  SUBCASE("single identity tree equals fit_rt") {
    ForestConfig cfg;
    cfg.n_trees = 1;
    cfg.bootstrap = false;
    auto f = fit_et(X, y, cfg);
    auto t = fit_rt(X, y, {cfg.min_leaf});
    REQUIRE(f.trees.size() == 1);
    CHECK((f.predict(X) - t.predict(X)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("mean lies within the member trees and is deterministic") {
    ForestConfig cfg;
    cfg.n_trees = 7;
    auto f = fit_et(X, y, cfg);
    auto g = fit_et(X, y, cfg);
    const Eigen::MatrixXd Q = random_matrix(rng, 30, 4);
    const Eigen::VectorXd p = f.predict(Q);
    CHECK((p - g.predict(Q)).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index r = 0; r < Q.rows(); ++r) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& t : f.trees) {
        const double v = t.predict_row(Q.row(r));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      CHECK(p(r) >= lo - 1e-12);
      CHECK(p(r) <= hi + 1e-12);
      CHECK(p(r) >= y.minCoeff());
      CHECK(p(r) <= y.maxCoeff());
    }
  }
}

TEST_CASE("mlp jacobian against central differences") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd X = random_matrix(rng, 5, 4, -2, 2);
    Mlp m = init_mlp(4, 3, 100 + static_cast<std::uint64_t>(trial));
    m.params = random_vector(rng, m.params.size(), -1.5, 1.5);
    const Eigen::MatrixXd J = m.jacobian(X);
    const double eps = 1e-6;
    double worst = 0.0;
    for (Eigen::Index p = 0; p < m.params.size(); ++p) {
      Mlp up = m, down = m;
      up.params(p) += eps;
      down.params(p) -= eps;
      const Eigen::VectorXd fd = (up.predict(X) - down.predict(X)) / (2 * eps);
      for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const double denom = std::max({std::abs(fd(r)), std::abs(J(r, p)), 1e-6});
        worst = std::max(worst, std::abs(fd(r) - J(r, p)) / denom);
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("levenberg-marquardt") {
  Rng rng(13);
  SUBCASE("learns the identity") {
    const Eigen::MatrixXd X = random_matrix(rng, 200, 1, -1.7, 1.7);
    const Eigen::MatrixXd Xv = random_matrix(rng, 50, 1, -1.7, 1.7);
    NnConfig cfg;
    cfg.hidden_units = 5;
    NnTrace tr;
    auto m = fit_nn(X, X.col(0), Xv, Xv.col(0), cfg, &tr);
    const double rmse = std::sqrt((m.predict(Xv) - Xv.col(0)).squaredNorm() / 50.0);
    CHECK(rmse < 0.05);
    CHECK(tr.epochs <= 200);
  }
  SUBCASE("accepted SSE strictly decreases") {
    const Eigen::MatrixXd X = random_matrix(rng, 5, 3);
    const Eigen::VectorXd y = random_vector(rng, 5);
    NnConfig cfg;
    cfg.hidden_units = 3;
    cfg.max_epochs = 200;
    NnTrace tr;
    fit_nn(X, y, Eigen::MatrixXd(0, 3), Eigen::VectorXd(0), cfg, &tr);
    REQUIRE(tr.accepted_sse.size() >= 2);
    for (std::size_t i = 1; i < tr.accepted_sse.size(); ++i) CHECK(tr.accepted_sse[i] < tr.accepted_sse[i - 1]);
  }
  SUBCASE("early stopping restores the best validation weights") {
    const Eigen::MatrixXd X = random_matrix(rng, 60, 3);
    const Eigen::VectorXd y = X.col(0) + 0.5 * random_vector(rng, 60);
    const Eigen::MatrixXd Xv = random_matrix(rng, 30, 3);
    const Eigen::VectorXd yv = Xv.col(0) + 0.5 * random_vector(rng, 30);
    NnConfig cfg;
    cfg.hidden_units = 10;
    NnTrace tr;
    auto m = fit_nn(X, y, Xv, yv, cfg, &tr);
    const double final_val = (yv - m.predict(Xv)).squaredNorm() / 30.0;
    const double best = *std::min_element(tr.val_mse.begin(), tr.val_mse.end());
    if (tr.best_step > 0) CHECK(final_val == doctest::Approx(best).epsilon(1e-12));
    if (tr.stop_reason == "validation")
      CHECK(tr.accepted - tr.best_step == cfg.max_validation_failures);
  }
}

TEST_CASE("gaussian process") {
  SUBCASE("three points against a direct inverse") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::MatrixXd X = random_matrix(rng, 3, 2);
      const Eigen::VectorXd y = random_vector(rng, 3);
      GpConfig cfg;
      cfg.signal_var = uniform(rng, 0.5, 2.0);
      cfg.length_scale = uniform(rng, 0.3, 2.0);
      cfg.noise_var = uniform(rng, 0.01, 0.5);
      auto gp = fit_gpr(X, y, cfg);
      Eigen::Matrix3d K;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          K(i, j) = cfg.signal_var * std::exp(-(X.row(i) - X.row(j)).squaredNorm() / (2 * cfg.length_scale * cfg.length_scale)) +
                    (i == j ? cfg.noise_var : 0.0);
      const Eigen::Vector3d alpha = oracle::inverse3(K) * Eigen::Vector3d(y);
      const Eigen::MatrixXd Q = random_matrix(rng, 5, 2);
      const Eigen::VectorXd p = gp.predict(Q);
      for (Eigen::Index q = 0; q < 5; ++q) {
        double ref = 0.0;
        for (int i = 0; i < 3; ++i)
          ref += cfg.signal_var * std::exp(-(Q.row(q) - X.row(i)).squaredNorm() / (2 * cfg.length_scale * cfg.length_scale)) * alpha(i);
        CHECK(std::abs(p(q) - ref) < 1e-8);
      }
    }
  }
  SUBCASE("interpolates at tiny noise") {
    Eigen::MatrixXd X(3, 2);
    X << 0, 0, 1, 0, 0, 2;
    const Eigen::Vector3d y(1.0, -0.5, 2.0);
    GpConfig cfg;
    cfg.noise_var = 1e-8;
    auto gp = fit_gpr(X, y, cfg);
    CHECK((gp.predict(X) - y).cwiseAbs().maxCoeff() < 1e-5);
  }
  SUBCASE("reverts to the prior far away") {
    Eigen::MatrixXd X(2, 1);
    X << 0, 1;
    auto gp = fit_gpr(X, Eigen::Vector2d(3, 4), {});
    Eigen::MatrixXd far(1, 1);
    far << 100.0;
    CHECK(std::abs(gp.predict(far)(0)) < 1e-12);
  }
  SUBCASE("subsample is seeded and capped") {
    Rng rng(2);
    const Eigen::MatrixXd X = random_matrix(rng, 300, 2);
    const Eigen::VectorXd y = random_vector(rng, 300);
    GpConfig cfg;
    cfg.max_exact_rows = 50;
    auto a = fit_gpr(X, y, cfg);
    auto b = fit_gpr(X, y, cfg);
    CHECK(a.support.rows() == 50);
    CHECK(a.alpha == b.alpha);
  }
}

TEST_CASE("linear svr") {
  set_log_level(LogLevel::Quiet);
  Rng rng(41);
  SUBCASE("duality gap at convergence") {
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXd X = random_matrix(rng, 40, 3);
      const Eigen::VectorXd y = X * Eigen::Vector3d(1, -2, 0.5) + 0.3 * random_vector(rng, 40);
      SvrConfig cfg;
      cfg.tol = 1e-6;
      cfg.max_passes = 100000;
      auto m = fit_svr(X, y, cfg);
      REQUIRE(m.converged);
      const double gap = svr_primal_objective(m, X, y, cfg) - svr_dual_objective(m, y, cfg);
      CHECK(gap >= -1e-9);
      CHECK(gap < 1e-3);
      CHECK(m.dual.cwiseAbs().maxCoeff() <= cfg.C + 1e-12);
    }
  }
  SUBCASE("homogeneity") {
    const Eigen::MatrixXd X = random_matrix(rng, 10, 2);
    const Eigen::VectorXd y = random_vector(rng, 10, -3, 3);
    SvrConfig a;
    a.tol = 1e-10;
    a.max_passes = 1000000;
    SvrConfig b = a;
    b.epsilon *= 2;
    b.C *= 2;
    auto ma = fit_svr(X, y, a);
    auto mb = fit_svr(X, 2.0 * y, b);
    const Eigen::MatrixXd Q = random_matrix(rng, 20, 2);
    CHECK((mb.predict(Q) - 2.0 * ma.predict(Q)).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("everything inside the tube") {
    const Eigen::MatrixXd X = random_matrix(rng, 20, 2);
    auto m = fit_svr(X, Eigen::VectorXd::Constant(20, 0.05), {});
    CHECK(m.support_vectors() == 0);
    CHECK((m.predict(X).array() - 0.05).abs().maxCoeff() <= 0.1);
  }
}

TEST_CASE("train, predict and persist every kind") {
  set_log_level(LogLevel::Quiet);
  Rng rng(77);
  auto ds = fixtures::random_dataset(rng, 600);
  SplitSpec spec;
  auto vs = split_validation(ds, spec);
  TrainConfig cfg;
  cfg.et.n_trees = 5;
  cfg.nn.hidden_units = 4;
  cfg.nn.max_epochs = 30;
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    auto m = train(kind, vs.fit, vs.val, cfg);
    const Eigen::VectorXd p = predict(m, vs.fit);
    CHECK(p.allFinite());
    CHECK(metrics(vs.fit.y, p).rmse == doctest::Approx(m.metrics.rmse).epsilon(1e-12));
    if (kind == RegressorKind::RT || kind == RegressorKind::ET) {
      CHECK(p.minCoeff() >= vs.fit.y.minCoeff() - 1e-9);
      CHECK(p.maxCoeff() <= vs.fit.y.maxCoeff() + 1e-9);
    }
    // persistence round trip reproduces predictions exactly
    std::stringstream buf;
    const auto j = model_to_json(m);
    auto back = model_from_json(nlohmann::json::parse(j.dump()));
    CHECK((predict(back, vs.val) - predict(m, vs.val)).cwiseAbs().maxCoeff() == 0.0);
    // determinism
    auto again = train(kind, vs.fit, vs.val, cfg);
    CHECK((predict(again, vs.val) - predict(m, vs.val)).cwiseAbs().maxCoeff() == 0.0);
    if (kind == RegressorKind::LR || kind == RegressorKind::RT || kind == RegressorKind::ET)
      CHECK(model_to_json(again) .dump() == j.dump());
  }
  SUBCASE("schema errors") {
    auto m = train(RegressorKind::LR, vs.fit, vs.val, cfg);
    CHECK(code_of([&] { predict(m, Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 38))); }) == ErrorCode::SchemaMismatch);
    Dataset other = vs.val;
    std::swap(other.input_ids[0], other.input_ids[1]);
    CHECK(code_of([&] { predict(m, other); }) == ErrorCode::SchemaMismatch);
    other = vs.val;
    other.parameter = Parameter::RelativeHumidity;
    CHECK(code_of([&] { predict(m, other); }) == ErrorCode::SchemaMismatch);
  }
}

TEST_CASE("constant target") {
  set_log_level(LogLevel::Quiet);
  Rng rng(78);
  auto ds = fixtures::random_dataset(rng, 300);
  ds.y.setConstant(7.25);
  auto vs = split_validation(ds, SplitSpec{});
  TrainConfig cfg;
  cfg.et.n_trees = 3;
  cfg.nn.hidden_units = 3;
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    auto m = train(kind, vs.fit, vs.val, cfg);
    const Eigen::VectorXd p = predict(m, vs.val);
    // NN starts from random weights; LM drives its output to the constant
    const double tol = kind == RegressorKind::NN ? 1e-6 : 0.0;
    CHECK((p.array() - 7.25).abs().maxCoeff() <= tol);
    CHECK(m.metrics.mse <= tol * tol);
  }
}

TEST_CASE("model file errors") {
  CHECK(code_of([] { model_from_json(nlohmann::json{{"format", "something-else"}}); }) == ErrorCode::SchemaMismatch);
  CHECK(code_of([] { load_model("/nonexistent/model.json"); }) != ErrorCode::EmptyDataset);
}
