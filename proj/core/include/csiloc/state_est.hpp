#pragma once

#include <Eigen/Core>

#include <vector>

#include "csiloc/geometry.hpp"

namespace csiloc {

/// Constant-velocity state (x mm, y mm, vx mm/s, vy mm/s) and its covariance.
struct KalmanState {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();

  PointMm position() const noexcept { return {mean[0], mean[1]}; }
};

struct KalmanConfig {
  double process_noise = 1.0;  // q, white-noise acceleration intensity (mm^2/s^3)
  Eigen::Matrix2d measurement_noise = Eigen::Matrix2d::Identity();  // R, mm^2
  Eigen::Matrix4d initial_covariance = Eigen::Matrix4d::Identity();  // P0

  /// P0 = diag(R, velocity_variance * I).
  static KalmanConfig from_noise(double process_noise, const Eigen::Matrix2d& measurement_noise,
                                 double velocity_variance = 1e6);

  void validate() const;
};

/// Discrete white-noise-acceleration covariance, per axis q * [[dt^3/3, dt^2/2], [dt^2/2, dt]].
Eigen::Matrix4d process_covariance(double dt, double process_noise);

Eigen::Matrix4d transition(double dt);

KalmanState predict(const KalmanState& state, double dt, const KalmanConfig& config);

/// Position-only measurement update in Joseph form; the result is resymmetrised.
KalmanState update(const KalmanState& state, PointMm measurement, const KalmanConfig& config);

struct TimedPoint {
  double t;  // seconds
  PointMm position;
};

struct TimedState {
  double t;
  KalmanState state;
};

/// The first measurement initialises position with zero velocity and
/// covariance P0; every later one is a predict/update pair.
std::vector<TimedState> run_filter(const std::vector<TimedPoint>& measurements, const KalmanConfig& config);

}  // namespace csiloc
