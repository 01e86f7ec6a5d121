#include "stationfill/app.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "stationfill/log.hpp"

namespace stationfill {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------------ config

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  synth.seed = s;
  split.rng_seed = s;
  train = train.with_seed(s);
  gap.seed = s;
}

fs::path RunConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() ? p : (base_dir / p).lexically_normal();
}

namespace {

json qc_rules_json(const QcRuleSet& r) {
  return {{"range_min", r.range_min}, {"range_max", r.range_max}, {"max_step", r.max_step}, {"flatline_len", r.flatline_len}};
}

QcRuleSet qc_rules_from(const json& j, QcRuleSet r) {
  r.range_min = j.value("range_min", r.range_min);
  r.range_max = j.value("range_max", r.range_max);
  r.max_step = j.value("max_step", r.max_step);
  r.flatline_len = j.value("flatline_len", r.flatline_len);
  r.validate();
  return r;
}

json periods_json(const std::vector<TestPeriod>& periods) {
  json arr = json::array();
  for (const auto& p : periods) arr.push_back({{"start", p.start.to_string()}, {"end", p.end.to_string()}});
  return arr;
}

std::vector<TestPeriod> periods_from(const json& j) {
  std::vector<TestPeriod> out;
  for (const auto& p : j) out.push_back({HourStamp::parse(p.at("start").get<std::string>()), HourStamp::parse(p.at("end").get<std::string>())});
  return out;
}

}  // namespace

json run_config_to_json(const RunConfig& c) {
  json kinds = json::array();
  for (auto k : c.kinds) kinds.push_back(to_string(k));
  json exclude = json::array();
  for (const auto& r : c.exclude) exclude.push_back({{"from", r.from.to_string()}, {"to", r.to.to_string()}});
  return {{"out", c.out_dir.string()},
          {"seed", c.seed},
          {"parameter", to_string(c.parameter)},
          {"stations", {{"csv", c.stations_csv}, {"target", c.target_id}, {"inputs", c.input_ids}}},
          {"qc", qc_rules_json(c.qc.value_or(QcRuleSet::defaults(c.parameter)))},
          {"exclude", exclude},
          {"split",
           {{"test_periods", periods_json(c.split.test_periods)},
            {"test_period_hours", c.test_period_hours},
            {"validation_fraction", c.split.validation_fraction},
            {"rng_seed", c.split.rng_seed}}},
          {"kinds", kinds},
          {"train", train_config_to_json(c.train)},
          {"mask_policy", to_string(c.mask_policy)},
          {"gap", {{"gap_hours", c.gap.gap_hours}, {"placement", to_string(c.gap.placement)}, {"seed", c.gap.seed}}},
          {"synth", synth_config_to_json(c.synth)},
          {"impute", {{"model", c.impute_model}, {"input", c.impute_input}}}};
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  try {
    RunConfig c;
    c.base_dir = base_dir;
    if (j.contains("parameter")) c.parameter = parse_parameter(j.at("parameter").get<std::string>());
    c.synth = SynthConfig::defaults(c.parameter);
    if (j.contains("seed")) c.apply_seed(j.at("seed").get<std::uint64_t>());
    if (j.contains("out")) c.out_dir = c.resolve(j.at("out").get<std::string>());
    else c.out_dir = c.resolve("out");
    if (j.contains("stations")) {
      const auto& s = j.at("stations");
      c.stations_csv = s.value("csv", c.stations_csv);
      c.target_id = s.value("target", c.target_id);
      if (s.contains("inputs")) c.input_ids = s.at("inputs").get<std::vector<std::string>>();
    }
    if (j.contains("qc")) c.qc = qc_rules_from(j.at("qc"), QcRuleSet::defaults(c.parameter));
    for (const auto& r : j.value("exclude", json::array()))
      c.exclude.push_back({HourStamp::parse(r.at("from").get<std::string>()), HourStamp::parse(r.at("to").get<std::string>())});
    if (j.contains("split")) {
      const auto& s = j.at("split");
      if (s.contains("test_periods")) c.split.test_periods = periods_from(s.at("test_periods"));
      c.test_period_hours = s.value("test_period_hours", c.test_period_hours);
      c.split.validation_fraction = s.value("validation_fraction", c.split.validation_fraction);
      c.split.rng_seed = s.value("rng_seed", c.split.rng_seed);
    }
    if (j.contains("kinds")) {
      c.kinds.clear();
      for (const auto& k : j.at("kinds")) c.kinds.push_back(parse_kind(k.get<std::string>()));
    }
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    if (j.contains("mask_policy")) c.mask_policy = parse_mask_policy(j.at("mask_policy").get<std::string>());
    if (j.contains("gap")) {
      const auto& g = j.at("gap");
      c.gap.gap_hours = g.value("gap_hours", c.gap.gap_hours);
      if (g.contains("placement")) c.gap.placement = parse_gap_placement(g.at("placement").get<std::string>());
      c.gap.seed = g.value("seed", c.gap.seed);
    }
    if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"), c.synth);
    c.synth.parameter = c.parameter;
    if (j.contains("impute")) {
      c.impute_model = j.at("impute").value("model", c.impute_model);
      c.impute_input = j.at("impute").value("input", c.impute_input);
    }
    if (c.split.validation_fraction <= 0.0 || c.split.validation_fraction >= 1.0)
      throw Error(ErrorCode::InvalidArgument, "split.validation_fraction must be in (0, 1)");
    if (c.test_period_hours < 1) throw Error(ErrorCode::InvalidArgument, "split.test_period_hours must be >= 1");
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::InvalidStamp:
    case ErrorCode::InvalidArgument:
      return 2;
    case ErrorCode::SchemaMismatch:
    case ErrorCode::ParameterMismatch:
    case ErrorCode::WrongInputCount:
      return 4;
    case ErrorCode::SingularSystem:
    case ErrorCode::CholeskyFailure:
    case ErrorCode::JacobianNonFinite:
    case ErrorCode::ModelUnavailable:
      return 5;
    default:
      return 3;
  }
}

// ------------------------------------------------------------------ helpers

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

void write_resolved(const RunConfig& cfg, const char* command) {
  write_json(cfg.out_dir / (std::string(command) + "_config.json"), run_config_to_json(cfg));
}

QcRuleSet rules_of(const RunConfig& cfg) { return cfg.qc.value_or(QcRuleSet::defaults(cfg.parameter)); }

fs::path input_csv(const RunConfig& cfg, const char* fallback) {
  return cfg.stations_csv.empty() ? cfg.out_dir / fallback : cfg.resolve(cfg.stations_csv);
}

StationNetwork load_network(const fs::path& path, const RunConfig& cfg) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, "missing input " + path.string());
  const auto csv = read_station_csv_file(path.string());
  StationNetwork net = network_from_csv(csv, cfg.target_id, cfg.input_ids);
  if (net.parameter() != cfg.parameter)
    throw Error(ErrorCode::ParameterMismatch, path.string() + " holds " + std::string(to_string(net.parameter())) +
                                                  ", config expects " + std::string(to_string(cfg.parameter)));
  return net;
}

std::vector<StationSeries> all_series(const StationNetwork& net) {
  std::vector<StationSeries> out{net.target()};
  out.insert(out.end(), net.inputs().begin(), net.inputs().end());
  return out;
}

// Cleaned network: qc output if present, otherwise the raw input after QC in memory.
StationNetwork cleaned_network(const RunConfig& cfg) {
  const fs::path cleaned = cfg.out_dir / "cleaned.csv";
  if (cfg.stations_csv.empty() && fs::exists(cleaned)) return load_network(cleaned, cfg);
  StationNetwork net = load_network(input_csv(cfg, "stations.csv"), cfg);
  const auto rules = rules_of(cfg);
  net = net.with_target(exclude_ranges(apply_qc(net.target(), rules).first, cfg.exclude));
  for (std::size_t i = 0; i < kInputStations; ++i)
    net = net.with_input(i, exclude_ranges(apply_qc(net.input(i), rules).first, cfg.exclude));
  return net;
}

struct Prepared {
  Dataset all;
  std::vector<TestPeriod> periods;
  TrainTestSplit split;
};

Prepared prepare(const RunConfig& cfg) {
  Prepared p;
  p.all = build_dataset(cleaned_network(cfg));
  if (cfg.split.test_periods.empty()) {
    const auto s = suggest_test_periods(p.all, cfg.test_period_hours);
    p.periods.assign(s.begin(), s.end());
  } else {
    p.periods = cfg.split.test_periods;
  }
  SplitSpec spec = cfg.split;
  spec.test_periods = p.periods;
  p.split = extract_test_periods(p.all, spec);
  if (p.split.train.empty()) throw Error(ErrorCode::EmptyDataset, "no training rows outside the test periods");
  return p;
}

fs::path model_path(const RunConfig& cfg, RegressorKind k) {
  return cfg.out_dir / "models" / (std::string(to_string(k)) + ".model.json");
}

TrainedModel load_model_checked(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::ModelUnavailable, "missing model " + path.string());
  try {
    return load_model(path.string());
  } catch (const Error& e) {
    throw Error(ErrorCode::ModelUnavailable, e.what());
  }
}

}  // namespace

// ----------------------------------------------------------------- commands

void cmd_synth(const RunConfig& cfg) {
  SynthConfig sc = cfg.synth;
  sc.parameter = cfg.parameter;
  const SynthNetwork net = generate_network(sc);
  const Corruption bad = corrupt(net.clean, sc);
  fs::create_directories(cfg.out_dir);
  write_station_csv_file((cfg.out_dir / "stations.csv").string(), all_series(bad.network));
  write_station_csv_file((cfg.out_dir / "clean_stations.csv").string(), all_series(net.clean));
  const std::vector<StationSeries> truth{net.truth};
  write_station_csv_file((cfg.out_dir / "truth.csv").string(), truth);
  write_json(cfg.out_dir / "corruption_ledger.json", ledger_to_json(bad.ledger));
  write_resolved(cfg, "synth");
  log_info("synth: " + std::to_string(net.clean.hours()) + " h x 7 stations, " + std::to_string(bad.ledger.size()) +
           " injected anomalies");
}

std::vector<QcReport> cmd_qc(const RunConfig& cfg) {
  StationNetwork net = load_network(input_csv(cfg, "stations.csv"), cfg);
  const auto rules = rules_of(cfg);
  rules.validate();
  std::vector<QcReport> reports;
  auto clean = [&](const StationSeries& s) {
    auto [out, rep] = apply_qc(s, rules);
    reports.push_back(rep);
    return exclude_ranges(out, cfg.exclude);
  };
  net = net.with_target(clean(net.target()));
  for (std::size_t i = 0; i < kInputStations; ++i) net = net.with_input(i, clean(net.input(i)));

  fs::create_directories(cfg.out_dir);
  write_station_csv_file((cfg.out_dir / "cleaned.csv").string(), all_series(net));
  json rj = json::array();
  for (const auto& r : reports)
    rj.push_back({{"station_id", r.station_id},
                  {"total_hours", r.total_hours},
                  {"already_missing", r.counts.already_missing},
                  {"out_of_range", r.counts.out_of_range},
                  {"spike", r.counts.spike},
                  {"flatline", r.counts.flatline},
                  {"missing_fraction", r.missing_fraction}});
  write_json(cfg.out_dir / "qc_report.json", {{"parameter", to_string(cfg.parameter)}, {"rules", qc_rules_json(rules)}, {"stations", rj}});
  const auto table = missing_probabilities(net);
  json pj = json::array();
  for (std::size_t k = 0; k <= kInputStations; ++k) pj.push_back({{"k", k}, {"percent", table.percent[k]}});
  write_json(cfg.out_dir / "missing_probabilities.json", {{"hours", table.hours}, {"table", pj}});
  write_resolved(cfg, "qc");
  return reports;
}

void cmd_build_dataset(const RunConfig& cfg) {
  const Prepared p = prepare(cfg);
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream f(cfg.out_dir / "dataset.csv", std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write dataset.csv");
    write_dataset_csv(f, p.all);
  }
  write_json(cfg.out_dir / "test_periods.json", periods_json(p.periods));
  write_resolved(cfg, "build-dataset");
  log_info("build-dataset: " + std::to_string(p.all.rows()) + " rows, " + std::to_string(p.split.train.rows()) +
           " outside the test periods");
}

std::size_t cmd_train(const RunConfig& cfg) {
  const Prepared p = prepare(cfg);
  const ValidationSplit vs = split_validation(p.split.train, cfg.split);
  fs::create_directories(cfg.out_dir / "models");

  json rows = json::array();
  json tr = json::array();
  std::ostringstream perf;
  perf << "kind,MSE,RMSE,TR_ms_per_sample\n";
  std::size_t failed = 0;
  for (auto kind : cfg.kinds) {
    const std::string name(to_string(kind));
    try {
      const TrainedModel m = train(kind, vs.fit, vs.val, cfg.train, cfg.mask_policy);
      save_model(m, model_path(cfg, kind).string());
      rows.push_back({{"kind", name}, {"mse", m.metrics.mse}, {"rmse", m.metrics.rmse}, {"fit_rows", m.metrics.fit_rows}});
      tr.push_back({{"kind", name}, {"ms_per_sample", m.metrics.throughput_ms_per_sample}});
      perf << name << ',' << format_value(m.metrics.mse) << ',' << format_value(m.metrics.rmse) << ','
           << format_value(m.metrics.throughput_ms_per_sample) << '\n';
      log_info("train " + name + ": rmse " + format_value(m.metrics.rmse));
    } catch (const Error& e) {
      ++failed;
      rows.push_back({{"kind", name}, {"error", e.what()}});
      log_warn("train " + name + " failed: " + e.what());
    }
  }
  write_json(cfg.out_dir / "metrics.json", {{"parameter", to_string(cfg.parameter)},
                                            {"fit_rows", vs.fit.rows()},
                                            {"validation_rows", vs.val.rows()},
                                            {"models", rows}});
  write_json(cfg.out_dir / "throughput.json", tr);
  write_text(cfg.out_dir / "training_performance.csv", perf.str());
  write_json(cfg.out_dir / "test_periods.json", periods_json(p.periods));
  write_resolved(cfg, "train");
  return failed;
}

EvalReport cmd_evaluate(const RunConfig& cfg) {
  std::vector<TrainedModel> models;
  for (auto kind : cfg.kinds) models.push_back(load_model_checked(model_path(cfg, kind)));
  const Prepared p = prepare(cfg);
  const EvalReport report = evaluate(models, p.split.tests, cfg.gap);
  render_report(report, models, p.split.tests, cfg.gap, cfg.out_dir.string());
  write_resolved(cfg, "evaluate");
  return report;
}

ImputeResult impute_network(const StationNetwork& network, const TrainedModel& model) {
  if (network.parameter() != model.parameter)
    throw Error(ErrorCode::SchemaMismatch, "network parameter differs from the model's");
  if (network.input_ids() != model.station_order)
    throw Error(ErrorCode::SchemaMismatch, "network station order differs from the model's");
  const auto& target = network.target();
  const std::size_t n = network.hours();
  ImputeResult res;
  res.imputed.assign(n, 0);
  std::vector<double> values(target.values().begin(), target.values().end());

  std::vector<std::size_t> todo;
  for (std::size_t h = 0; h < n; ++h) {
    if (!is_sentinel(values[h])) continue;
    bool any_input = false;
    for (const auto& s : network.inputs()) any_input = any_input || !is_sentinel(s[h]);
    if (h < 2 || !any_input) {
      ++res.unfillable_hours;
      continue;
    }
    todo.push_back(h);
  }
  if (!todo.empty()) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(todo.size()), static_cast<Eigen::Index>(kFeatureCount));
    for (std::size_t r = 0; r < todo.size(); ++r) {
      const auto row = assemble_row(network, network.start().plus(static_cast<std::int64_t>(todo[r])))->to_array();
      for (std::size_t c = 0; c < kFeatureCount; ++c) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
    const Eigen::VectorXd pred = predict(model, X);
    for (std::size_t r = 0; r < todo.size(); ++r) {
      values[todo[r]] = pred(static_cast<Eigen::Index>(r));
      res.imputed[todo[r]] = 1;
    }
  }
  res.imputed_hours = todo.size();
  res.series = target.with_values(std::move(values));
  return res;
}

ImputeResult cmd_impute(const RunConfig& cfg) {
  fs::path mpath;
  try {
    mpath = model_path(cfg, parse_kind(cfg.impute_model));
  } catch (const Error&) {
    mpath = cfg.resolve(cfg.impute_model);
  }
  const TrainedModel model = load_model_checked(mpath);
  const fs::path in = cfg.impute_input.empty() ? cfg.out_dir / "cleaned.csv" : cfg.resolve(cfg.impute_input);
  const StationNetwork net = load_network(in, cfg);
  ImputeResult res;
  try {
    res = impute_network(net, model);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SchemaMismatch) throw;
    throw Error(ErrorCode::ModelUnavailable, e.what());
  }

  std::ostringstream out;
  out << "station_id,year,month,day,hour,parameter,value,imputed\n";
  const auto& s = res.series;
  for (std::size_t h = 0; h < s.size(); ++h) {
    const HourStamp t = s.start().plus(static_cast<std::int64_t>(h));
    out << s.station_id() << ',' << t.year << ',' << t.month << ',' << t.day << ',' << t.hour << ','
        << to_string(s.parameter()) << ',' << format_value(s[h]) << ',' << int(res.imputed[h]) << '\n';
  }
  write_text(cfg.out_dir / "imputed.csv", out.str());
  write_json(cfg.out_dir / "impute_summary.json", {{"model", to_string(model.kind)},
                                                   {"hours", s.size()},
                                                   {"imputed_hours", res.imputed_hours},
                                                   {"unfillable_hours", res.unfillable_hours}});
  write_resolved(cfg, "impute");
  if (res.unfillable_hours > 0)
    log_warn("impute: " + std::to_string(res.unfillable_hours) + " target hours left missing (no input available)");
  return res;
}

int run_command(const std::string& name, const RunConfig& cfg) {
  try {
    if (name == "synth") cmd_synth(cfg);
    else if (name == "qc") cmd_qc(cfg);
    else if (name == "build-dataset") cmd_build_dataset(cfg);
    else if (name == "train") return cmd_train(cfg) > 0 ? 5 : 0;
    else if (name == "evaluate") cmd_evaluate(cfg);
    else if (name == "impute") cmd_impute(cfg);
    else {
      log_warn("unknown command " + name);
      return 2;
    }
    return 0;
  } catch (const Error& e) {
    log_warn(e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    log_warn(e.what());
    return 3;
  }
}

}  // namespace stationfill
