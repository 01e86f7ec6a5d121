#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationfill/error.hpp"
#include "stationfill/evalbench.hpp"
#include "stationfill/models.hpp"
#include "stationfill/qc.hpp"
#include "stationfill/synthnet.hpp"

namespace stationfill {

/// Everything one batch run needs. Relative paths resolve against `base_dir`.
struct RunConfig {
  std::filesystem::path base_dir = ".";
  std::filesystem::path out_dir = "out";

  // Station file and ids. Empty stations_csv means the previous stage's output in out_dir.
  std::string stations_csv;
  std::string target_id = "TGT";
  std::vector<std::string> input_ids{"S1", "S2", "S3", "S4", "S5", "S6"};
  Parameter parameter = Parameter::Temperature;

  std::optional<QcRuleSet> qc;  // unset: defaults for the parameter
  std::vector<DateRange> exclude;

  SplitSpec split;
  std::int64_t test_period_hours = 168;  // used when split.test_periods is empty

  std::vector<RegressorKind> kinds{kAllKinds.begin(), kAllKinds.end()};
  TrainConfig train;
  MaskPolicy mask_policy = MaskPolicy::ZeroAfterStandardize;
  GapSpec gap;

  SynthConfig synth;

  // impute
  std::string impute_model = "NN";  // kind name or model file path
  std::string impute_input;         // empty: cleaned.csv in out_dir

  std::uint64_t seed = 42;

  /// Pushes `seed` into every seeded component.
  void apply_seed(std::uint64_t s);
  std::filesystem::path resolve(const std::string& path) const;
};

nlohmann::json run_config_to_json(const RunConfig& cfg);
/// Keys absent from `j` keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);

/// Exit code for a library error: 2 parse, 3 data, 4 schema, 5 model.
int exit_code_for(ErrorCode code);

struct ImputeResult {
  StationSeries series;          // target with imputed hours filled
  std::vector<std::uint8_t> imputed;  // 1 where the value came from the model
  std::size_t imputed_hours = 0;
  std::size_t unfillable_hours = 0;  // target and all six inputs missing
};

/// Causal gap filling: each missing target hour is predicted from the inputs at h-2..h.
ImputeResult impute_network(const StationNetwork& network, const TrainedModel& model);

// Subcommands. Each writes `<name>_config.json` (the resolved config) into out_dir.
void cmd_synth(const RunConfig& cfg);
std::vector<QcReport> cmd_qc(const RunConfig& cfg);
void cmd_build_dataset(const RunConfig& cfg);
/// Returns the number of kinds that failed; the others are still written.
std::size_t cmd_train(const RunConfig& cfg);
EvalReport cmd_evaluate(const RunConfig& cfg);
ImputeResult cmd_impute(const RunConfig& cfg);

/// Runs one subcommand by name and maps errors to exit codes.
int run_command(const std::string& name, const RunConfig& cfg);

}  // namespace stationfill
