#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "stationfill/synthnet.hpp"

using namespace stationfill;

namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("generation is seed deterministic") {
  SynthConfig cfg;
  cfg.years = 1;
  auto a = generate_network(cfg);
  auto b = generate_network(cfg);
  CHECK(a.clean == b.clean);
  CHECK(a.clean.hours() == 8760);
  cfg.seed = 43;
  CHECK_FALSE(generate_network(cfg).clean == a.clean);
}

TEST_CASE("degenerate config gives identical stations") {
  SynthConfig cfg;
  cfg.years = 1;
  cfg.nonlinear_coupling_strength = 0.0;
  cfg.shared_noise_std = 0.0;
  cfg.station_noise_std = 0.0;
  cfg.station_offsets = std::vector<double>(7, 0.0);
  auto net = generate_network(cfg).clean;
  for (const auto& s : net.inputs())
    for (std::size_t h = 0; h < net.hours(); ++h) REQUIRE(s[h] == net.target()[h]);
}

TEST_CASE("stations are strongly correlated") {
  SynthConfig cfg;
  auto net = generate_network(cfg).clean;
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(pearson(net.target().values(), net.input(i).values()) > 0.9);
    for (std::size_t j = i + 1; j < 6; ++j) CHECK(pearson(net.input(i).values(), net.input(j).values()) > 0.9);
  }
}

TEST_CASE("dataset size with no anomalies") {
  for (int years : {1, 2}) {
    SynthConfig cfg;
    cfg.years = years;
    cfg.anomaly_rate.clear();
    cfg.spike_rate = 0.0;
    cfg.stuck_rate = 0.0;
    auto c = corrupt(generate_network(cfg).clean, cfg);
    CHECK(c.ledger.empty());
    CHECK(build_dataset(c.network).rows() == static_cast<std::size_t>(years) * 8760 - 2);
  }
}

TEST_CASE("corruption") {
  SUBCASE("zero rates leave the network unchanged") {
    SynthConfig cfg;
    cfg.years = 1;
    cfg.anomaly_rate = std::vector<double>(7, 0.0);
    cfg.spike_rate = 0.0;
    cfg.stuck_rate = 0.0;
    auto net = generate_network(cfg).clean;
    CHECK(corrupt(net, cfg).network == net);
  }
  SUBCASE("sentinel fraction follows the configured rate") {
    SynthConfig cfg;
    cfg.years = 12;
    cfg.spike_rate = 0.0;
    cfg.stuck_rate = 0.0;
    cfg.anomaly_rate = {0.05, 0.01, 0.02, 0.03, 0.05, 0.08, 0.1};
    auto c = corrupt(generate_network(cfg).clean, cfg);
    const double hours = static_cast<double>(c.network.hours());
    REQUIRE(hours >= 1e5);
    const std::vector<std::string> ids{"TGT", "S1", "S2", "S3", "S4", "S5", "S6"};
    for (std::size_t i = 0; i < 7; ++i) {
      const double frac = static_cast<double>(c.hours_of(AnomalyKind::DropToSentinel, ids[i])) / hours;
      CAPTURE(ids[i]);
      CHECK(std::abs(frac - cfg.anomaly_rate[i]) <= 0.1 * cfg.anomaly_rate[i]);
      CHECK(c.network.series(ids[i]).sentinel_count() == c.hours_of(AnomalyKind::DropToSentinel, ids[i]));
    }
  }
  SUBCASE("ledger matches the data") {
    SynthConfig cfg;
    cfg.years = 1;
    cfg.spike_rate = 0.002;
    cfg.stuck_rate = 0.001;
    auto clean = generate_network(cfg).clean;
    auto c = corrupt(clean, cfg);
    for (const auto& a : c.ledger) {
      const auto& s = c.network.series(a.station_id);
      const auto& orig = clean.series(a.station_id);
      if (a.kind == AnomalyKind::Spike) CHECK(std::abs(std::abs(s[a.start] - orig[a.start]) - cfg.spike_magnitude) < 1e-9);
      if (a.kind == AnomalyKind::Stuck)
        for (std::size_t k = 0; k < a.length; ++k) CHECK(s[a.start + k] == s[a.start - 1]);
    }
  }
}

TEST_CASE("config json round trip") {
  auto cfg = SynthConfig::defaults(Parameter::RelativeHumidity);
  cfg.years = 3;
  auto back = synth_config_from_json(synth_config_to_json(cfg), SynthConfig{});
  CHECK(synth_config_to_json(back).dump() == synth_config_to_json(cfg).dump());
  auto net = generate_network(SynthConfig{.years = 1, .parameter = Parameter::RelativeHumidity}).clean;
  for (const auto& s : net.inputs())
    for (double v : s.values()) CHECK((v >= 0.0 && v <= 100.0));
}
