#include "stationfill/synthnet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stationfill/error.hpp"
#include "stationfill/random.hpp"

namespace stationfill {

using nlohmann::json;

SynthConfig SynthConfig::defaults(Parameter p) {
  SynthConfig c;
  c.parameter = p;
  if (p == Parameter::RelativeHumidity) {
    c.base_level = 65.0;
    c.annual_amplitude = 12.0;
    c.diurnal_amplitude = 12.0;
    c.shared_noise_std = 2.0;
    c.station_noise_std = 1.5;
    c.station_offsets = {0.0, 2.0, -1.5, 1.0, -2.5, 3.0, -1.0};
    c.spike_magnitude = 120.0;
  }
  return c;
}

void SynthConfig::validate() const {
  if (n_stations != 7) throw Error(ErrorCode::InvalidArgument, "synth: n_stations must be 7 (target + 6 inputs)");
  if (years < 1) throw Error(ErrorCode::InvalidArgument, "synth: years must be >= 1");
  if (!(shared_ar1_rho >= 0.0 && shared_ar1_rho < 1.0)) throw Error(ErrorCode::InvalidArgument, "synth: rho must be in [0, 1)");
  if (annual_amplitude < 0 || diurnal_amplitude < 0 || shared_noise_std < 0 || station_noise_std < 0)
    throw Error(ErrorCode::InvalidArgument, "synth: amplitudes and noise must be >= 0");
  if (!start.valid()) throw Error(ErrorCode::InvalidStamp, "synth: start");
  if (!station_offsets.empty() && station_offsets.size() != 7)
    throw Error(ErrorCode::InvalidArgument, "synth: station_offsets needs 7 entries");
  if (!anomaly_rate.empty() && anomaly_rate.size() != 7)
    throw Error(ErrorCode::InvalidArgument, "synth: anomaly_rate needs 7 entries");
  for (double r : anomaly_rate)
    if (!(r >= 0.0 && r < 1.0)) throw Error(ErrorCode::InvalidArgument, "synth: anomaly_rate must be in [0, 1)");
  if (!(gap_mean_hours >= 1.0)) throw Error(ErrorCode::InvalidArgument, "synth: gap_mean_hours must be >= 1");
  if (spike_rate < 0 || stuck_rate < 0 || stuck_hours < 1)
    throw Error(ErrorCode::InvalidArgument, "synth: invalid spike/stuck settings");
}

namespace {

std::string station_name(int i) { return i == 0 ? "TGT" : "S" + std::to_string(i); }

double clamp_parameter(Parameter p, double v) {
  return p == Parameter::RelativeHumidity ? std::clamp(v, 0.0, 100.0) : v;
}

}  // namespace

SynthNetwork generate_network(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.hours();
  Rng rng(cfg.seed);
  NormalSampler normal;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const bool humidity = cfg.parameter == Parameter::RelativeHumidity;
  // Temperature: coldest mid-January and at 05h. Humidity runs in antiphase.
  const double sign = humidity ? 1.0 : -1.0;
  const std::int64_t t0 = cfg.start.ordinal();
  const std::int64_t year0 = HourStamp{cfg.start.year, 1, 15, 0}.ordinal();

  std::vector<double> base(n);
  double ar = cfg.shared_ar1_rho > 0.0 || cfg.shared_noise_std > 0.0
                  ? normal(rng) * cfg.shared_noise_std / std::sqrt(1.0 - cfg.shared_ar1_rho * cfg.shared_ar1_rho)
                  : 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::int64_t abs_hour = t0 + static_cast<std::int64_t>(t);
    const double annual = std::cos(kTwoPi * static_cast<double>(abs_hour - year0) / 8760.0);
    const double diurnal = std::cos(kTwoPi * static_cast<double>(((abs_hour % 24) + 24) % 24 - 5) / 24.0);
    if (t > 0) ar = cfg.shared_ar1_rho * ar + cfg.shared_noise_std * normal(rng);
    base[t] = cfg.base_level + sign * (cfg.annual_amplitude * annual + cfg.diurnal_amplitude * diurnal) + ar;
  }

  std::vector<std::vector<double>> raw(7, std::vector<double>(n));
  for (int s = 0; s < 7; ++s) {
    const double offset = cfg.station_offsets.empty() ? 0.0 : cfg.station_offsets[static_cast<std::size_t>(s)];
    for (std::size_t t = 0; t < n; ++t) raw[static_cast<std::size_t>(s)][t] = base[t] + offset + cfg.station_noise_std * normal(rng);
  }
  const double scale = std::max(cfg.annual_amplitude, 1.0);
  for (std::size_t t = 0; t < n; ++t) {
    double m = 0.0;
    for (std::size_t s = 1; s < 7; ++s) m += raw[s][t];
    m /= 6.0;
    raw[0][t] += cfg.nonlinear_coupling_strength * scale * std::tanh((m - cfg.base_level) / scale);
  }

  std::vector<StationSeries> series;
  for (int s = 0; s < 7; ++s) {
    auto& v = raw[static_cast<std::size_t>(s)];
    for (double& x : v) x = clamp_parameter(cfg.parameter, x);
    series.emplace_back(station_name(s), cfg.parameter, cfg.start, std::move(v));
  }
  SynthNetwork out;
  out.clean = align_network(series[0], std::span(series).subspan(1));
  out.truth = out.clean.target();
  return out;
}

std::size_t Corruption::hours_of(AnomalyKind kind, const std::string& station_id) const {
  std::size_t total = 0;
  for (const auto& a : ledger)
    if (a.kind == kind && a.station_id == station_id) total += a.length;
  return total;
}

Corruption corrupt(const StationNetwork& network, const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed ^ 0x5bd1e995u);
  Corruption out;
  out.network = network;
  const auto range = raw_range(network.parameter());

  auto corrupt_series = [&](const StationSeries& s, double gap_rate) {
    std::vector<double> v(s.values().begin(), s.values().end());
    const std::size_t n = v.size();
    // round(gap_rate * n) sentinel hours, laid down as geometric blocks at random starts.
    if (gap_rate > 0.0 && n > 0) {
      const double leave = 1.0 / cfg.gap_mean_hours;
      std::size_t budget = static_cast<std::size_t>(std::llround(gap_rate * static_cast<double>(n)));
      std::size_t misses = 0;
      while (budget > 0 && misses < 100 * n) {
        const std::size_t t = uniform_index(rng, n);
        std::size_t len = 1;
        while (uniform01(rng) >= leave) ++len;
        if (is_sentinel(v[t])) {
          ++misses;
          continue;
        }
        std::size_t written = 0;
        while (written < len && written < budget && t + written < n && !is_sentinel(v[t + written])) {
          v[t + written] = kSentinel;
          ++written;
        }
        out.ledger.push_back({s.station_id(), AnomalyKind::DropToSentinel, t, written});
        budget -= written;
      }
    }
    std::vector<std::uint8_t> spiked(n, 0);
    if (cfg.spike_rate > 0.0) {
      for (std::size_t t = 0; t < n; ++t) {
        if (uniform01(rng) >= cfg.spike_rate || is_sentinel(v[t])) continue;
        const double up = v[t] + cfg.spike_magnitude;
        const double down = v[t] - cfg.spike_magnitude;
        const bool go_up = uniform01(rng) < 0.5;
        double x = go_up ? up : down;
        if (x > range.max || x < range.min) x = go_up ? down : up;
        if (x > range.max || x < range.min) continue;
        v[t] = x;
        spiked[t] = 1;
        out.ledger.push_back({s.station_id(), AnomalyKind::Spike, t, 1});
      }
    }
    if (cfg.stuck_rate > 0.0) {
      for (std::size_t t = 1; t < n; ++t) {
        if (uniform01(rng) >= cfg.stuck_rate || is_sentinel(v[t - 1])) continue;
        const double stuck = v[t - 1];
        const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cfg.stuck_hours), n - t);
        std::size_t written = 0;
        // a run ends at a gap or a spike so every ledger entry stays visible in the data
        for (std::size_t k = 0; k < len && !is_sentinel(v[t + k]) && !spiked[t + k]; ++k, ++written) v[t + k] = stuck;
        if (written > 0) out.ledger.push_back({s.station_id(), AnomalyKind::Stuck, t, written});
        t += written;
      }
    }
    return s.with_values(std::move(v));
  };

  auto rate = [&](std::size_t i) { return cfg.anomaly_rate.empty() ? 0.0 : cfg.anomaly_rate[i]; };
  out.network = out.network.with_target(corrupt_series(network.target(), rate(0)));
  for (std::size_t i = 0; i < kInputStations; ++i)
    out.network = out.network.with_input(i, corrupt_series(network.input(i), rate(i + 1)));
  return out;
}

json ledger_to_json(const std::vector<InjectedAnomaly>& ledger) {
  json arr = json::array();
  for (const auto& a : ledger) {
    const char* kind = a.kind == AnomalyKind::DropToSentinel ? "drop_to_sentinel" : a.kind == AnomalyKind::Spike ? "spike" : "stuck";
    arr.push_back({{"station_id", a.station_id}, {"kind", kind}, {"start", a.start}, {"length", a.length}});
  }
  return arr;
}

json synth_config_to_json(const SynthConfig& c) {
  return {{"n_stations", c.n_stations},
          {"years", c.years},
          {"parameter", to_string(c.parameter)},
          {"seed", c.seed},
          {"start", c.start.to_string()},
          {"base_level", c.base_level},
          {"annual_amplitude", c.annual_amplitude},
          {"diurnal_amplitude", c.diurnal_amplitude},
          {"shared_ar1_rho", c.shared_ar1_rho},
          {"shared_noise_std", c.shared_noise_std},
          {"station_noise_std", c.station_noise_std},
          {"station_offsets", c.station_offsets},
          {"nonlinear_coupling_strength", c.nonlinear_coupling_strength},
          {"anomaly_rate", c.anomaly_rate},
          {"gap_mean_hours", c.gap_mean_hours},
          {"spike_rate", c.spike_rate},
          {"spike_magnitude", c.spike_magnitude},
          {"stuck_rate", c.stuck_rate},
          {"stuck_hours", c.stuck_hours}};
}

SynthConfig synth_config_from_json(const json& j, SynthConfig c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("n_stations", c.n_stations);
  get("years", c.years);
  if (j.contains("parameter")) c.parameter = parse_parameter(j.at("parameter").get<std::string>());
  get("seed", c.seed);
  if (j.contains("start")) c.start = HourStamp::parse(j.at("start").get<std::string>());
  get("base_level", c.base_level);
  get("annual_amplitude", c.annual_amplitude);
  get("diurnal_amplitude", c.diurnal_amplitude);
  get("shared_ar1_rho", c.shared_ar1_rho);
  get("shared_noise_std", c.shared_noise_std);
  get("station_noise_std", c.station_noise_std);
  get("station_offsets", c.station_offsets);
  get("nonlinear_coupling_strength", c.nonlinear_coupling_strength);
  get("anomaly_rate", c.anomaly_rate);
  get("gap_mean_hours", c.gap_mean_hours);
  get("spike_rate", c.spike_rate);
  get("spike_magnitude", c.spike_magnitude);
  get("stuck_rate", c.stuck_rate);
  get("stuck_hours", c.stuck_hours);
  return c;
}

}  // namespace stationfill
