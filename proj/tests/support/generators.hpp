#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "csiloc/csi_data.hpp"
#include "csiloc/hynn.hpp"

namespace csiloc::testing {

/// Hand-rolled generator source for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double mean = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mean, sd)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }
  std::uint64_t seed() { return rng_(); }

  /// Magnitudes spread over many decades, any phase.
  std::complex<double> complex_value() {
    const double mag = std::pow(10.0, uniform(-6.0, 6.0));
    return std::polar(mag, uniform(-std::numbers::pi, std::numbers::pi));
  }

  double angle() { return uniform(-std::numbers::pi, std::numbers::pi); }

  PointMm point(const Bounds& b) { return {uniform(b.x.lo, b.x.hi), uniform(b.y.lo, b.y.hi)}; }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Random polar table on a regular lattice: moduli in [0, 2], arguments in (-pi, pi].
inline FingerprintTable random_grid_table(Gen& g, int nx, int ny, double step, int antennas, int subcarriers) {
  std::vector<int> ids(static_cast<std::size_t>(antennas));
  for (int i = 0; i < antennas; ++i) ids[static_cast<std::size_t>(i)] = i + 1;
  FingerprintTable t(ids, subcarriers);
  std::vector<double> row(static_cast<std::size_t>(2 * antennas * subcarriers));
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = j % 2 == 0 ? g.uniform(0.0, 2.0) : g.angle();
      t.add_row(row, {x * step, y * step});
    }
  return t;
}

/// The smallest architecture that still exercises every layer kind.
inline HynnArchitecture tiny_architecture(int side = 8, int features = 6) {
  HynnArchitecture a;
  a.image_side = side;
  a.num_features = features;
  a.conv1_filters = 2;
  a.conv2_filters = 3;
  a.kernel = 3;
  a.dense1 = 5;
  a.dense2 = 4;
  a.head_width = 6;
  return a;
}

inline Eigen::MatrixXd random_matrix(Gen& g, Eigen::Index rows, Eigen::Index cols, double lo = 0.0, double hi = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = g.uniform(lo, hi);
  return m;
}

inline HynnParams random_params(Gen& g, const HynnArchitecture& arch, double spread = 0.5) {
  HynnParams p = init_params(arch, g.seed());
  for (double& v : p.values) v = g.uniform(-spread, spread);
  for (std::size_t i = 0; i < p.norm_state.size(); ++i) p.norm_state[i] = g.uniform(0.2, 1.5);
  return p;
}

}  // namespace csiloc::testing
