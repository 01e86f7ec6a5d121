#include "stationfill/models.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "stationfill/error.hpp"
#include "stationfill/log.hpp"

namespace stationfill {

using nlohmann::json;

std::string_view to_string(RegressorKind k) {
  switch (k) {
    case RegressorKind::LR: return "LR";
    case RegressorKind::RT: return "RT";
    case RegressorKind::ET: return "ET";
    case RegressorKind::NN: return "NN";
    case RegressorKind::GPR: return "GPR";
    case RegressorKind::SVR: return "SVR";
  }
  return "?";
}

RegressorKind parse_kind(std::string_view text) {
  for (auto k : kAllKinds)
    if (to_string(k) == text) return k;
  throw Error(ErrorCode::ParseError, "unknown regressor kind '" + std::string(text) + "'");
}

TrainConfig TrainConfig::with_seed(std::uint64_t seed) const {
  TrainConfig c = *this;
  c.rng_seed = seed;
  c.et.seed = seed;
  c.nn.seed = seed;
  c.gpr.seed = seed;
  c.svr.seed = seed;
  return c;
}

Metrics metrics(const Eigen::VectorXd& measured, const Eigen::VectorXd& predicted) {
  if (measured.size() != predicted.size())
    throw Error(ErrorCode::LengthMismatch, "metrics: " + std::to_string(measured.size()) + " measured vs " +
                                               std::to_string(predicted.size()) + " predicted");
  if (measured.size() == 0) throw Error(ErrorCode::EmptyInput, "metrics: no samples");
  Metrics m;
  m.mse = (measured - predicted).squaredNorm() / static_cast<double>(measured.size());
  m.rmse = std::sqrt(m.mse);
  return m;
}

namespace {

void check_schema(const Eigen::MatrixXd& X, const char* what) {
  if (X.cols() != static_cast<Eigen::Index>(kFeatureCount))
    throw Error(ErrorCode::SchemaMismatch, std::string(what) + " has " + std::to_string(X.cols()) +
                                               " columns, expected " + std::to_string(kFeatureCount));
}

Eigen::VectorXd predict_standardized(const ModelParams& params, const Eigen::MatrixXd& Z) {
  return std::visit([&](const auto& m) -> Eigen::VectorXd { return m.predict(Z); }, params);
}

}  // namespace

TrainedModel train(RegressorKind kind, const Dataset& fit, const Dataset& val, const TrainConfig& cfg,
                   MaskPolicy policy) {
  if (fit.empty()) throw Error(ErrorCode::EmptyDataset, "train: empty fit set");
  check_schema(fit.X, "fit set");
  if (!val.empty()) check_schema(val.X, "validation set");
  if (kind == RegressorKind::NN && val.empty())
    throw Error(ErrorCode::EmptyDataset, "train: NN needs a validation set for early stopping");

  TrainedModel model;
  model.kind = kind;
  model.config = cfg;
  model.policy = policy;
  model.station_order = fit.input_ids;
  model.parameter = fit.parameter;

  const auto t0 = std::chrono::steady_clock::now();
  model.scaler = fit_scaler(fit);
  const Eigen::MatrixXd Z = model.scaler.transform(fit.X, policy);
  const Eigen::VectorXd yz = model.scaler.transform_target(fit.y);
  switch (kind) {
    case RegressorKind::LR: model.params = fit_lr(Z, yz, cfg.lr.on_singular); break;
    case RegressorKind::RT: model.params = fit_rt(Z, yz, cfg.rt); break;
    case RegressorKind::ET: model.params = fit_et(Z, yz, cfg.et); break;
    case RegressorKind::NN: {
      const Eigen::MatrixXd Zv = model.scaler.transform(val.X, policy);
      const Eigen::VectorXd yv = model.scaler.transform_target(val.y);
      model.params = fit_nn(Z, yz, Zv, yv, cfg.nn, &model.nn_trace);
      break;
    }
    case RegressorKind::GPR: model.params = fit_gpr(Z, yz, cfg.gpr); break;
    case RegressorKind::SVR: model.params = fit_svr(Z, yz, cfg.svr); break;
  }
  const auto t1 = std::chrono::steady_clock::now();

  const Eigen::VectorXd pred = model.scaler.inverse_target(predict_standardized(model.params, Z));
  if (!pred.allFinite()) throw Error(ErrorCode::InvalidValue, std::string(to_string(kind)) + " produced non-finite predictions");
  const Metrics m = metrics(fit.y, pred);
  model.metrics.mse = m.mse;
  model.metrics.rmse = m.rmse;
  model.metrics.fit_rows = fit.rows();
  model.metrics.throughput_ms_per_sample =
      std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(fit.rows());
  return model;
}

Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& X) {
  check_schema(X, "prediction input");
  const Eigen::MatrixXd Z = model.scaler.transform(X, model.policy);
  Eigen::VectorXd out = model.scaler.inverse_target(predict_standardized(model.params, Z));
  if (!out.allFinite()) throw Error(ErrorCode::InvalidValue, "non-finite prediction");
  return out;
}

Eigen::VectorXd predict(const TrainedModel& model, const Dataset& ds) {
  if (ds.parameter != model.parameter)
    throw Error(ErrorCode::SchemaMismatch, "dataset parameter differs from the model's");
  if (ds.input_ids != model.station_order)
    throw Error(ErrorCode::SchemaMismatch, "dataset station order differs from the model's");
  return predict(model, ds.X);
}

// -------------------------------------------------------------- persistence

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd mat_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto d = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(d.size()) != rows * cols) throw Error(ErrorCode::ParseError, "matrix size mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(d.data(), rows, cols);
}

json tree_json(const RegressionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.samples});
  return nodes;
}

RegressionTree tree_from(const json& j) {
  RegressionTree t;
  for (const auto& n : j) {
    TreeNode node;
    node.feature = n.at(0).get<int>();
    node.threshold = n.at(1).get<double>();
    node.left = n.at(2).get<int>();
    node.right = n.at(3).get<int>();
    node.value = n.at(4).get<double>();
    node.samples = n.at(5).get<std::size_t>();
    t.nodes.push_back(node);
  }
  const auto count = static_cast<int>(t.nodes.size());
  for (const auto& n : t.nodes)
    if (!n.leaf() && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count || n.feature >= static_cast<int>(kFeatureCount)))
      throw Error(ErrorCode::ParseError, "corrupt tree node");
  if (t.nodes.empty()) throw Error(ErrorCode::ParseError, "empty tree");
  return t;
}

json params_json(const ModelParams& p) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return {{"weights", vec_json(m.weights)}, {"intercept", m.intercept}};
        } else if constexpr (std::is_same_v<T, RegressionTree>) {
          return {{"nodes", tree_json(m)}};
        } else if constexpr (std::is_same_v<T, Forest>) {
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_json(t));
          return {{"trees", trees}};
        } else if constexpr (std::is_same_v<T, Mlp>) {
          return {{"inputs", m.inputs}, {"hidden", m.hidden}, {"params", vec_json(m.params)}};
        } else if constexpr (std::is_same_v<T, GaussianProcess>) {
          return {{"support", mat_json(m.support)}, {"alpha", vec_json(m.alpha)}, {"signal_var", m.signal_var},
                  {"length_scale", m.length_scale}, {"jitter_steps", m.jitter_steps}};
        } else {
          return {{"w", vec_json(m.w)}, {"bias", m.bias}, {"passes", m.passes}, {"converged", m.converged},
                  {"max_violation", m.max_violation}, {"support_vectors", m.support_vectors()}};
        }
      },
      p);
}

ModelParams params_from(RegressorKind kind, const json& j) {
  switch (kind) {
    case RegressorKind::LR: {
      LinearModel m;
      m.weights = vec_from(j.at("weights"));
      m.intercept = j.at("intercept").get<double>();
      if (m.weights.size() != static_cast<Eigen::Index>(kFeatureCount)) throw Error(ErrorCode::SchemaMismatch, "LR weight count");
      return m;
    }
    case RegressorKind::RT: return tree_from(j.at("nodes"));
    case RegressorKind::ET: {
      Forest f;
      for (const auto& t : j.at("trees")) f.trees.push_back(tree_from(t));
      if (f.trees.empty()) throw Error(ErrorCode::ParseError, "empty forest");
      return f;
    }
    case RegressorKind::NN: {
      Mlp m;
      m.inputs = j.at("inputs").get<int>();
      m.hidden = j.at("hidden").get<int>();
      m.params = vec_from(j.at("params"));
      if (m.inputs != static_cast<int>(kFeatureCount)) throw Error(ErrorCode::SchemaMismatch, "NN input width");
      if (static_cast<std::size_t>(m.params.size()) != Mlp::param_count(m.inputs, m.hidden))
        throw Error(ErrorCode::ParseError, "NN parameter count");
      return m;
    }
    case RegressorKind::GPR: {
      GaussianProcess g;
      g.support = mat_from(j.at("support"));
      g.alpha = vec_from(j.at("alpha"));
      g.signal_var = j.at("signal_var").get<double>();
      g.length_scale = j.at("length_scale").get<double>();
      g.jitter_steps = j.value("jitter_steps", 0);
      if (g.support.cols() != static_cast<Eigen::Index>(kFeatureCount)) throw Error(ErrorCode::SchemaMismatch, "GPR support width");
      if (g.alpha.size() != g.support.rows()) throw Error(ErrorCode::ParseError, "GPR alpha size");
      return g;
    }
    case RegressorKind::SVR: {
      LinearSvr s;
      s.w = vec_from(j.at("w"));
      s.bias = j.at("bias").get<double>();
      s.passes = j.value("passes", 0);
      s.converged = j.value("converged", false);
      s.max_violation = j.value("max_violation", 0.0);
      if (s.w.size() != static_cast<Eigen::Index>(kFeatureCount)) throw Error(ErrorCode::SchemaMismatch, "SVR weight count");
      return s;
    }
  }
  throw Error(ErrorCode::ParseError, "unknown kind");
}

}  // namespace

json train_config_to_json(const TrainConfig& c) {
  return {
      {"rng_seed", c.rng_seed},
      {"lr", {{"on_singular", c.lr.on_singular == RankPolicy::Fail ? "fail" : "minimum_norm"}}},
      {"rt", {{"min_leaf", c.rt.min_leaf}}},
      {"et", {{"n_trees", c.et.n_trees}, {"bootstrap_fraction", c.et.bootstrap_fraction}, {"bootstrap", c.et.bootstrap},
              {"min_leaf", c.et.min_leaf}, {"seed", c.et.seed}}},
      {"nn", {{"hidden_units", c.nn.hidden_units}, {"max_epochs", c.nn.max_epochs}, {"lm_lambda0", c.nn.lm_lambda0},
              {"lm_decrease", c.nn.lm_decrease}, {"lm_increase", c.nn.lm_increase}, {"lm_lambda_max", c.nn.lm_lambda_max},
              {"max_validation_failures", c.nn.max_validation_failures}, {"seed", c.nn.seed}}},
      {"gpr", {{"signal_var", c.gpr.signal_var}, {"length_scale", c.gpr.length_scale}, {"noise_var", c.gpr.noise_var},
               {"max_exact_rows", c.gpr.max_exact_rows}, {"subsample_seed", c.gpr.seed}}},
      {"svr", {{"epsilon", c.svr.epsilon}, {"C", c.svr.C}, {"max_passes", c.svr.max_passes}, {"tol", c.svr.tol},
               {"seed", c.svr.seed}}},
  };
}

namespace {

template <typename T>
void overlay(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  if (j.contains("rng_seed")) c = c.with_seed(j.at("rng_seed").get<std::uint64_t>());
  if (j.contains("lr") && j["lr"].contains("on_singular")) {
    const auto s = j["lr"]["on_singular"].get<std::string>();
    if (s == "fail") c.lr.on_singular = RankPolicy::Fail;
    else if (s == "minimum_norm") c.lr.on_singular = RankPolicy::MinimumNorm;
    else throw Error(ErrorCode::ParseError, "lr.on_singular must be 'fail' or 'minimum_norm'");
  }
  if (j.contains("rt")) overlay(j["rt"], "min_leaf", c.rt.min_leaf);
  if (j.contains("et")) {
    const auto& e = j["et"];
    overlay(e, "n_trees", c.et.n_trees);
    overlay(e, "bootstrap_fraction", c.et.bootstrap_fraction);
    overlay(e, "bootstrap", c.et.bootstrap);
    overlay(e, "min_leaf", c.et.min_leaf);
    overlay(e, "seed", c.et.seed);
  }
  if (j.contains("nn")) {
    const auto& n = j["nn"];
    overlay(n, "hidden_units", c.nn.hidden_units);
    overlay(n, "max_epochs", c.nn.max_epochs);
    overlay(n, "lm_lambda0", c.nn.lm_lambda0);
    overlay(n, "lm_decrease", c.nn.lm_decrease);
    overlay(n, "lm_increase", c.nn.lm_increase);
    overlay(n, "lm_lambda_max", c.nn.lm_lambda_max);
    overlay(n, "max_validation_failures", c.nn.max_validation_failures);
    overlay(n, "seed", c.nn.seed);
  }
  if (j.contains("gpr")) {
    const auto& g = j["gpr"];
    overlay(g, "signal_var", c.gpr.signal_var);
    overlay(g, "length_scale", c.gpr.length_scale);
    overlay(g, "noise_var", c.gpr.noise_var);
    overlay(g, "max_exact_rows", c.gpr.max_exact_rows);
    overlay(g, "subsample_seed", c.gpr.seed);
  }
  if (j.contains("svr")) {
    const auto& s = j["svr"];
    overlay(s, "epsilon", c.svr.epsilon);
    overlay(s, "C", c.svr.C);
    overlay(s, "max_passes", c.svr.max_passes);
    overlay(s, "tol", c.svr.tol);
    overlay(s, "seed", c.svr.seed);
  }
  return c;
}

json model_to_json(const TrainedModel& m) {
  json scaler = {{"mean", std::vector<double>(m.scaler.mean.begin(), m.scaler.mean.end())},
                 {"std", std::vector<double>(m.scaler.stddev.begin(), m.scaler.stddev.end())},
                 {"target_mean", m.scaler.target_mean},
                 {"target_std", m.scaler.target_std}};
  return {
      {"format", kModelFormat},
      {"kind", to_string(m.kind)},
      {"parameter", to_string(m.parameter)},
      {"features", feature_names()},
      {"station_order", m.station_order},
      {"mask_policy", to_string(m.policy)},
      {"config", train_config_to_json(m.config)},
      {"scaler", scaler},
      // wall-clock throughput stays out so model files are reproducible
      {"metrics", {{"mse", m.metrics.mse}, {"rmse", m.metrics.rmse}, {"fit_rows", m.metrics.fit_rows}}},
      {"params", params_json(m.params)},
  };
}

TrainedModel model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      throw Error(ErrorCode::SchemaMismatch, "unsupported model format '" + j.at("format").get<std::string>() + "'");
    if (j.at("features").get<std::vector<std::string>>() != feature_names())
      throw Error(ErrorCode::SchemaMismatch, "model feature schema differs from the 39-column layout");
    TrainedModel m;
    m.kind = parse_kind(j.at("kind").get<std::string>());
    m.parameter = parse_parameter(j.at("parameter").get<std::string>());
    m.station_order = j.at("station_order").get<std::vector<std::string>>();
    if (m.station_order.size() != kInputStations) throw Error(ErrorCode::SchemaMismatch, "station order must list 6 inputs");
    m.policy = parse_mask_policy(j.at("mask_policy").get<std::string>());
    m.config = train_config_from_json(j.at("config"));
    const auto& s = j.at("scaler");
    const auto mean = s.at("mean").get<std::vector<double>>();
    const auto sd = s.at("std").get<std::vector<double>>();
    if (mean.size() != kFeatureCount || sd.size() != kFeatureCount) throw Error(ErrorCode::SchemaMismatch, "scaler width");
    std::copy(mean.begin(), mean.end(), m.scaler.mean.begin());
    std::copy(sd.begin(), sd.end(), m.scaler.stddev.begin());
    m.scaler.target_mean = s.at("target_mean").get<double>();
    m.scaler.target_std = s.at("target_std").get<double>();
    const auto& mt = j.at("metrics");
    m.metrics.mse = mt.at("mse").get<double>();
    m.metrics.rmse = mt.at("rmse").get<double>();
    m.metrics.fit_rows = mt.at("fit_rows").get<std::size_t>();
    m.params = params_from(m.kind, j.at("params"));
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model artifact: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << model_to_json(model).dump(1) << '\n';
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace stationfill
