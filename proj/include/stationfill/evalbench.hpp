#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationfill/features.hpp"
#include "stationfill/models.hpp"

namespace stationfill {

/// Which of the six inputs are treated as unavailable; bit i is input station i.
struct MissingMask {
  std::uint8_t bits = 0;

  int k() const noexcept { return __builtin_popcount(bits); }
  bool masked(std::size_t station) const noexcept { return (bits >> station) & 1u; }
  std::string to_string() const;  // station 0 first, '1' = missing

  friend bool operator==(MissingMask, MissingMask) = default;
};

/// All 64 masks ordered by (k, bits).
std::vector<MissingMask> enumerate_masks();

enum class GapPlacement { FullPeriod, RandomBlock };

struct GapSpec {
  int gap_hours = 24;
  GapPlacement placement = GapPlacement::FullPeriod;
  std::uint64_t seed = 42;
};

std::string_view to_string(GapPlacement p);
GapPlacement parse_gap_placement(std::string_view text);

/// Blanks the three lags of every masked station over one block (the whole
/// period, or one seeded block of gap_hours) and clears their indicators.
/// The mask-policy substitution happens inside `predict`, using the model's policy.
Dataset inject_missing(const Dataset& test, MissingMask mask, const GapSpec& spec);

struct EvalCell {
  std::size_t period = 0;
  MissingMask mask;
  double rmse = 0.0;
};

struct ModelEval {
  RegressorKind kind = RegressorKind::LR;
  std::vector<EvalCell> cells;               // period-major, masks in enumerate order
  std::array<double, kInputStations + 1> worst{};  // max over masks with popcount k and all periods
  std::array<std::uint8_t, kInputStations + 1> worst_mask{};
  std::array<std::size_t, kInputStations + 1> worst_period{};
};

struct EvalReport {
  Parameter parameter = Parameter::Temperature;
  std::vector<TestPeriod> periods;
  std::vector<ModelEval> models;
};

EvalReport evaluate(const std::vector<TrainedModel>& models, const std::vector<Dataset>& tests, const GapSpec& spec);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// Worst RMSE per k, columns "6 missing" ... "No missing".
void write_worst_csv(std::ostream& out, const EvalReport& report);

/// Per-hour predictions for the k = 0 mask and each k's worst mask.
void write_predictions_csv(std::ostream& out, const EvalReport& report, const std::vector<TrainedModel>& models,
                           const std::vector<Dataset>& tests, const GapSpec& spec);

/// Writes eval_report.json, eval_worst.csv and eval_predictions.csv into `dir`.
void render_report(const EvalReport& report, const std::vector<TrainedModel>& models,
                   const std::vector<Dataset>& tests, const GapSpec& spec, const std::string& dir);

}  // namespace stationfill
