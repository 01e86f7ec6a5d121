#include "stationfill/evalbench.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "stationfill/error.hpp"
#include "stationfill/parallel.hpp"
#include "stationfill/random.hpp"

namespace stationfill {

using nlohmann::json;

std::string MissingMask::to_string() const {
  std::string s(kInputStations, '0');
  for (std::size_t i = 0; i < kInputStations; ++i)
    if (masked(i)) s[i] = '1';
  return s;
}

std::vector<MissingMask> enumerate_masks() {
  std::vector<MissingMask> masks;
  masks.reserve(64);
  for (unsigned b = 0; b < (1u << kInputStations); ++b) masks.push_back({static_cast<std::uint8_t>(b)});
  std::stable_sort(masks.begin(), masks.end(), [](MissingMask a, MissingMask b) {
    return a.k() != b.k() ? a.k() < b.k() : a.bits < b.bits;
  });
  return masks;
}

std::string_view to_string(GapPlacement p) {
  return p == GapPlacement::FullPeriod ? "full_period" : "random_block";
}

GapPlacement parse_gap_placement(std::string_view text) {
  if (text == "full_period" || text == "FullPeriod") return GapPlacement::FullPeriod;
  if (text == "random_block" || text == "RandomBlock") return GapPlacement::RandomBlock;
  throw Error(ErrorCode::ParseError, "unknown gap placement '" + std::string(text) + "'");
}

Dataset inject_missing(const Dataset& test, MissingMask mask, const GapSpec& spec) {
  if (spec.gap_hours < 1) throw Error(ErrorCode::InvalidArgument, "gap_hours must be >= 1");
  const auto n = static_cast<Eigen::Index>(test.rows());
  if (spec.gap_hours > n)
    throw Error(ErrorCode::GapTooLong, std::to_string(spec.gap_hours) + " h gap in a " + std::to_string(n) + " h period");
  Dataset out = test;
  if (mask.bits == 0) return out;
  Eigen::Index begin = 0;
  Eigen::Index len = n;
  if (spec.placement == GapPlacement::RandomBlock) {
    Rng rng(spec.seed);
    len = spec.gap_hours;
    begin = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n - len + 1)));
  }
  for (std::size_t s = 0; s < kInputStations; ++s) {
    if (!mask.masked(s)) continue;
    for (std::size_t lag = 0; lag < kLagsPerStation; ++lag) {
      out.X.col(static_cast<Eigen::Index>(lag_column(s, lag))).segment(begin, len).setConstant(kSentinel);
      out.X.col(static_cast<Eigen::Index>(lai_column(s, lag))).segment(begin, len).setZero();
    }
  }
  return out;
}

namespace {

// Distinct, order-independent seed for each (period, mask) cell.
GapSpec cell_spec(const GapSpec& spec, std::size_t period, MissingMask mask) {
  GapSpec s = spec;
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(period), static_cast<std::uint32_t>(mask.bits)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  s.seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  return s;
}

void check_compatible(const TrainedModel& m, const Dataset& test) {
  if (m.parameter != test.parameter)
    throw Error(ErrorCode::SchemaMismatch, std::string(to_string(m.kind)) + " model parameter differs from the test set");
  if (m.station_order != test.input_ids)
    throw Error(ErrorCode::SchemaMismatch, std::string(to_string(m.kind)) + " model station order differs from the test set");
}

}  // namespace

EvalReport evaluate(const std::vector<TrainedModel>& models, const std::vector<Dataset>& tests, const GapSpec& spec) {
  EvalReport report;
  if (!tests.empty()) report.parameter = tests.front().parameter;
  else if (!models.empty()) report.parameter = models.front().parameter;
  for (const auto& t : tests) {
    if (t.empty()) throw Error(ErrorCode::EmptyDataset, "empty test period");
    report.periods.push_back({t.hour_index.front(), t.hour_index.back()});
  }
  for (const auto& m : models)
    for (const auto& t : tests) check_compatible(m, t);

  const auto masks = enumerate_masks();
  for (const auto& model : models) {
    ModelEval me;
    me.kind = model.kind;
    me.cells.resize(tests.size() * masks.size());
    parallel_for(me.cells.size(), [&](std::size_t c) {
      const std::size_t p = c / masks.size();
      const MissingMask mask = masks[c % masks.size()];
      const Dataset injected = inject_missing(tests[p], mask, cell_spec(spec, p, mask));
      me.cells[c] = {p, mask, metrics(tests[p].y, predict(model, injected)).rmse};
    });
    me.worst.fill(-1.0);
    for (const auto& cell : me.cells) {
      const auto k = static_cast<std::size_t>(cell.mask.k());
      if (cell.rmse > me.worst[k]) {
        me.worst[k] = cell.rmse;
        me.worst_mask[k] = cell.mask.bits;
        me.worst_period[k] = cell.period;
      }
    }
    if (me.cells.empty()) me.worst.fill(0.0);
    report.models.push_back(std::move(me));
  }
  return report;
}

json report_to_json(const EvalReport& report) {
  json periods = json::array();
  for (const auto& p : report.periods) periods.push_back({{"start", p.start.to_string()}, {"end", p.end.to_string()}});
  json models = json::array();
  for (const auto& m : report.models) {
    json cells = json::array();
    for (const auto& c : m.cells)
      cells.push_back({{"period", c.period}, {"mask_bits", c.mask.bits}, {"k", c.mask.k()}, {"rmse", c.rmse}});
    json worst = json::array();
    for (std::size_t k = 0; k <= kInputStations; ++k) worst.push_back({{"k", k}, {"rmse", m.worst[k]}});
    models.push_back({{"kind", to_string(m.kind)}, {"cells", cells}, {"worst", worst}});
  }
  return {{"parameter", to_string(report.parameter)}, {"periods", periods}, {"models", models}};
}

EvalReport report_from_json(const json& j) {
  try {
    EvalReport r;
    r.parameter = parse_parameter(j.at("parameter").get<std::string>());
    for (const auto& p : j.value("periods", json::array()))
      r.periods.push_back({HourStamp::parse(p.at("start").get<std::string>()), HourStamp::parse(p.at("end").get<std::string>())});
    for (const auto& m : j.at("models")) {
      ModelEval me;
      me.kind = parse_kind(m.at("kind").get<std::string>());
      for (const auto& c : m.at("cells"))
        me.cells.push_back({c.at("period").get<std::size_t>(), {c.at("mask_bits").get<std::uint8_t>()}, c.at("rmse").get<double>()});
      for (const auto& w : m.at("worst")) {
        const auto k = w.at("k").get<std::size_t>();
        if (k > kInputStations) throw Error(ErrorCode::ParseError, "worst.k out of range");
        me.worst[k] = w.at("rmse").get<double>();
      }
      r.models.push_back(std::move(me));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("eval report: ") + e.what());
  }
}

void write_worst_csv(std::ostream& out, const EvalReport& report) {
  out << "kind";
  for (int k = static_cast<int>(kInputStations); k >= 0; --k)
    out << ',' << (k == 0 ? std::string("No missing") : std::to_string(k) + " missing");
  out << '\n';
  for (const auto& m : report.models) {
    out << to_string(m.kind);
    for (int k = static_cast<int>(kInputStations); k >= 0; --k) out << ',' << format_value(m.worst[static_cast<std::size_t>(k)]);
    out << '\n';
  }
}

void write_predictions_csv(std::ostream& out, const EvalReport& report, const std::vector<TrainedModel>& models,
                           const std::vector<Dataset>& tests, const GapSpec& spec) {
  out << "kind,period,mask_bits,k,timestamp,measured,predicted\n";
  for (std::size_t mi = 0; mi < report.models.size() && mi < models.size(); ++mi) {
    const auto& me = report.models[mi];
    std::vector<std::uint8_t> shown{0};
    for (std::size_t k = 1; k <= kInputStations; ++k)
      if (std::find(shown.begin(), shown.end(), me.worst_mask[k]) == shown.end()) shown.push_back(me.worst_mask[k]);
    for (std::size_t p = 0; p < tests.size(); ++p) {
      for (auto bits : shown) {
        const MissingMask mask{bits};
        const Dataset injected = inject_missing(tests[p], mask, cell_spec(spec, p, mask));
        const Eigen::VectorXd pred = predict(models[mi], injected);
        for (Eigen::Index r = 0; r < pred.size(); ++r)
          out << to_string(me.kind) << ',' << p << ',' << mask.to_string() << ',' << mask.k() << ','
              << tests[p].hour_index[static_cast<std::size_t>(r)].to_string() << ',' << format_value(tests[p].y(r)) << ','
              << format_value(pred(r)) << '\n';
      }
    }
  }
}

void render_report(const EvalReport& report, const std::vector<TrainedModel>& models, const std::vector<Dataset>& tests,
                   const GapSpec& spec, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("eval_report.json");
    f << report_to_json(report).dump(1) << '\n';
  }
  {
    auto f = open("eval_worst.csv");
    write_worst_csv(f, report);
  }
  {
    auto f = open("eval_predictions.csv");
    write_predictions_csv(f, report, models, tests, spec);
  }
}

}  // namespace stationfill
