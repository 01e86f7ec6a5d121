#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationfill/timeseries.hpp"

namespace stationfill {

/// Synthetic seven-station network. Station 0 is the target, 1..6 the inputs.
/// A synthetic year is 8760 h; the index starts at `start`.
struct SynthConfig {
  int n_stations = 7;
  int years = 4;
  Parameter parameter = Parameter::Temperature;
  std::uint64_t seed = 42;
  HourStamp start{2001, 1, 1, 0};

  double base_level = 13.0;
  double annual_amplitude = 10.0;
  double diurnal_amplitude = 4.0;
  double shared_ar1_rho = 0.95;
  double shared_noise_std = 0.5;  // innovation std of the shared AR(1) term
  double station_noise_std = 0.3;
  std::vector<double> station_offsets{0.0, 0.4, -0.3, 0.2, -0.5, 0.6, -0.2};
  double nonlinear_coupling_strength = 0.3;

  // Anomalies, per station (empty vector = none).
  std::vector<double> anomaly_rate{0.0, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02};  // fraction of hours dropped to sentinel
  double gap_mean_hours = 6.0;    // geometric block length
  double spike_rate = 0.0005;     // per station-hour
  double spike_magnitude = 30.0;  // added or subtracted
  double stuck_rate = 0.0001;     // per station-hour chance a stuck run starts
  int stuck_hours = 30;

  static SynthConfig defaults(Parameter p);
  void validate() const;
  std::size_t hours() const { return static_cast<std::size_t>(years) * 8760; }
};

nlohmann::json synth_config_to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base);

struct SynthNetwork {
  StationNetwork clean;
  StationSeries truth;  // uncorrupted target
};

/// Annual + diurnal sinusoids plus shared AR(1) noise; each station adds an offset and
/// independent noise; the target also gets coupling * scale * tanh((neighbour mean - level) / scale).
SynthNetwork generate_network(const SynthConfig& cfg);

enum class AnomalyKind { DropToSentinel, Spike, Stuck };

struct InjectedAnomaly {
  std::string station_id;
  AnomalyKind kind;
  std::size_t start;   // hour offset in the network index
  std::size_t length;  // hours
};

struct Corruption {
  StationNetwork network;
  std::vector<InjectedAnomaly> ledger;

  std::size_t hours_of(AnomalyKind kind, const std::string& station_id) const;
};

/// Seeded anomaly injection. Rates of zero leave the network unchanged.
Corruption corrupt(const StationNetwork& network, const SynthConfig& cfg);

nlohmann::json ledger_to_json(const std::vector<InjectedAnomaly>& ledger);

}  // namespace stationfill
