#pragma once

// Small builders and hand-rolled random generators shared by the tests.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stationfill/features.hpp"
#include "stationfill/random.hpp"
#include "stationfill/timeseries.hpp"

namespace fixtures {

using namespace stationfill;

inline const HourStamp kStart{2001, 1, 1, 0};

inline StationSeries series(const std::string& id, std::vector<double> v, HourStamp start = kStart,
                            Parameter p = Parameter::Temperature) {
  return StationSeries(id, p, start, std::move(v));
}

/// Seven stations of length n; value(station, hour), station 0 is the target.
inline StationNetwork network(std::size_t n, const std::function<double(int, std::size_t)>& value,
                              Parameter p = Parameter::Temperature, HourStamp start = kStart) {
  std::vector<StationSeries> all;
  for (int s = 0; s < 7; ++s) {
    std::vector<double> v(n);
    for (std::size_t h = 0; h < n; ++h) v[h] = value(s, h);
    all.push_back(series(s == 0 ? "TGT" : "S" + std::to_string(s), std::move(v), start, p));
  }
  return align_network(all[0], std::span(all).subspan(1));
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = uniform(rng, lo, hi);
  return m;
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  return random_matrix(rng, n, 1, lo, hi).col(0);
}

/// A dataset with the 39-column layout built from a random clean network.
inline Dataset random_dataset(Rng& rng, std::size_t hours) {
  std::vector<double> base(hours);
  double level = 10.0;
  for (auto& b : base) b = (level += uniform(rng, -0.5, 0.5));
  auto net = network(hours, [&](int s, std::size_t h) { return base[h] + 0.3 * s + uniform(rng, -0.2, 0.2); });
  return build_dataset(net);
}

}  // namespace fixtures
