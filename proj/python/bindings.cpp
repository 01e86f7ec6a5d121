#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "stationfill/app.hpp"
#include "stationfill/log.hpp"

namespace py = pybind11;
using namespace stationfill;
using nlohmann::json;

namespace {

std::vector<StationSeries> all_of(const StationNetwork& net) {
  std::vector<StationSeries> out{net.target()};
  out.insert(out.end(), net.inputs().begin(), net.inputs().end());
  return out;
}

py::dict series_dict(const std::vector<StationSeries>& series) {
  py::dict d;
  for (const auto& s : series)
    d[py::str(s.station_id())] = Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(s.values().data(), static_cast<Eigen::Index>(s.size())));
  return d;
}

StationSeries series_from(const std::string& id, const Eigen::VectorXd& v, const std::string& parameter,
                          const std::string& start) {
  return StationSeries(id, parse_parameter(parameter), HourStamp::parse(start),
                       std::vector<double>(v.data(), v.data() + v.size()));
}

Dataset dataset_from(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::string& parameter,
                     const std::vector<std::string>& input_ids) {
  if (X.cols() != static_cast<Eigen::Index>(kFeatureCount))
    throw Error(ErrorCode::SchemaMismatch, "X must have 39 columns");
  if (X.rows() != y.size()) throw Error(ErrorCode::SchemaMismatch, "X and y row counts differ");
  Dataset ds;
  ds.X = X;
  ds.y = y;
  ds.parameter = parse_parameter(parameter);
  ds.input_ids = input_ids;
  ds.hour_index.resize(static_cast<std::size_t>(y.size()));
  return ds;
}

const std::vector<std::string> kDefaultInputs{"S1", "S2", "S3", "S4", "S5", "S6"};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hourly station gap filling: QC, features, regressors and the missing-input benchmark.";
  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error;
      py::object inst = exc(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      inst.attr("exit_code") = exit_code_for(e.code());
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  m.def("set_log_level", [](const std::string& level) {
    set_log_level(level == "quiet" ? LogLevel::Quiet : level == "info" ? LogLevel::Info : LogLevel::Warn);
  });

  m.def(
      "run",
      [](const std::string& command, const std::string& config_json, const std::string& base_dir) {
        auto cfg = run_config_from_json(json::parse(config_json.empty() ? "{}" : config_json), base_dir);
        py::gil_scoped_release release;
        return run_command(command, cfg);
      },
      py::arg("command"), py::arg("config_json") = "{}", py::arg("base_dir") = ".",
      "Runs one subcommand and returns its exit code.");

  m.def(
      "synth",
      [](const std::string& config_json, bool corrupted) {
        SynthConfig cfg = synth_config_from_json(json::parse(config_json), SynthConfig{});
        cfg.validate();
        const auto net = generate_network(cfg);
        if (!corrupted) return series_dict(all_of(net.clean));
        return series_dict(all_of(corrupt(net.clean, cfg).network));
      },
      py::arg("config_json") = "{}", py::arg("corrupted") = true);

  m.def(
      "qc",
      [](const Eigen::VectorXd& values, const std::string& parameter, const std::string& start) {
        const auto [out, rep] = apply_qc(series_from("X", values, parameter, start), QcRuleSet::defaults(parse_parameter(parameter)));
        py::dict counts;
        counts["already_missing"] = rep.counts.already_missing;
        counts["out_of_range"] = rep.counts.out_of_range;
        counts["spike"] = rep.counts.spike;
        counts["flatline"] = rep.counts.flatline;
        return py::make_tuple(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(out.values().data(), static_cast<Eigen::Index>(out.size()))),
                              counts);
      },
      py::arg("values"), py::arg("parameter") = "T", py::arg("start") = "2001-01-01T00");

  m.def(
      "build_dataset",
      [](const std::string& csv_path, const std::string& target, const std::vector<std::string>& inputs) {
        const auto ds = build_dataset(network_from_csv(read_station_csv_file(csv_path), target, inputs));
        std::vector<std::string> hours;
        hours.reserve(ds.hour_index.size());
        for (const auto& h : ds.hour_index) hours.push_back(h.to_string());
        return py::make_tuple(ds.X, ds.y, hours);
      },
      py::arg("csv_path"), py::arg("target") = "TGT", py::arg("inputs") = kDefaultInputs);

  m.def("feature_names", &feature_names);
  m.def("enumerate_masks", [] {
    std::vector<std::string> out;
    for (auto mask : enumerate_masks()) out.push_back(mask.to_string());
    return out;
  });
  m.def("metrics", [](const Eigen::VectorXd& measured, const Eigen::VectorXd& predicted) {
    if (measured.size() != predicted.size()) throw Error(ErrorCode::SchemaMismatch, "length mismatch");
    const auto r = metrics(measured, predicted);
    return py::make_tuple(r.mse, r.rmse);
  });

  py::class_<TrainedModel>(m, "Model")
      .def_static(
          "train",
          [](const std::string& kind, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& X_val,
             const Eigen::VectorXd& y_val, const std::string& config_json, const std::string& parameter,
             const std::vector<std::string>& inputs) {
            const auto fit = dataset_from(X, y, parameter, inputs);
            const auto val = dataset_from(X_val, y_val, parameter, inputs);
            const auto cfg = train_config_from_json(json::parse(config_json));
            py::gil_scoped_release release;
            return train(parse_kind(kind), fit, val, cfg);
          },
          py::arg("kind"), py::arg("X"), py::arg("y"), py::arg("X_val"), py::arg("y_val"), py::arg("config_json") = "{}",
          py::arg("parameter") = "T", py::arg("inputs") = kDefaultInputs)
      .def_static("load", &load_model, py::arg("path"))
      .def("save", &save_model, py::arg("path"))
      .def("predict", [](const TrainedModel& self, const Eigen::MatrixXd& X) { return predict(self, X); })
      .def("to_json", [](const TrainedModel& self) { return model_to_json(self).dump(); })
      .def_property_readonly("kind", [](const TrainedModel& self) { return std::string(to_string(self.kind)); })
      .def_property_readonly("rmse", [](const TrainedModel& self) { return self.metrics.rmse; })
      .def_property_readonly("fit_rows", [](const TrainedModel& self) { return self.metrics.fit_rows; });

  m.attr("SENTINEL") = kSentinel;
}
