#include "csiloc/state_est.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "csiloc/error.hpp"

namespace csiloc {
namespace {

Eigen::Matrix4d symmetrised(const Eigen::Matrix4d& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

KalmanConfig KalmanConfig::from_noise(double process_noise, const Eigen::Matrix2d& measurement_noise,
                                      double velocity_variance) {
  KalmanConfig c;
  c.process_noise = process_noise;
  c.measurement_noise = measurement_noise;
  c.initial_covariance.setZero();
  c.initial_covariance.topLeftCorner<2, 2>() = measurement_noise;
  c.initial_covariance(2, 2) = velocity_variance;
  c.initial_covariance(3, 3) = velocity_variance;
  return c;
}

void KalmanConfig::validate() const {
  if (!(process_noise > 0.0) || !std::isfinite(process_noise))
    throw Error(ErrorCode::InvalidKalmanConfig, "process noise must be > 0");
  if (!measurement_noise.allFinite() || (measurement_noise - measurement_noise.transpose()).norm() > 1e-9 * (1.0 + measurement_noise.norm()))
    throw Error(ErrorCode::InvalidKalmanConfig, "measurement noise must be symmetric");
  if (Eigen::LLT<Eigen::Matrix2d>(measurement_noise).info() != Eigen::Success ||
      measurement_noise.determinant() <= 0.0)
    throw Error(ErrorCode::InvalidKalmanConfig, "measurement noise must be positive definite");
  if (!initial_covariance.allFinite()) throw Error(ErrorCode::InvalidKalmanConfig, "initial covariance not finite");
}

Eigen::Matrix4d transition(double dt) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

Eigen::Matrix4d process_covariance(double dt, double q) {
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  for (int axis = 0; axis < 2; ++axis) {
    const int p = axis;
    const int v = axis + 2;
    m(p, p) = q * dt3 / 3.0;
    m(p, v) = m(v, p) = q * dt2 / 2.0;
    m(v, v) = q * dt;
  }
  return m;
}

KalmanState predict(const KalmanState& state, double dt, const KalmanConfig& config) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidDt, "dt must be > 0");
  const Eigen::Matrix4d f = transition(dt);
  KalmanState out;
  out.mean = f * state.mean;
  out.covariance = symmetrised(f * state.covariance * f.transpose() + process_covariance(dt, config.process_noise));
  return out;
}

KalmanState update(const KalmanState& state, PointMm measurement, const KalmanConfig& config) {
  if (!std::isfinite(measurement.x) || !std::isfinite(measurement.y))
    throw Error(ErrorCode::RangeError, "measurement is not finite");
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const Eigen::Matrix2d innovation_cov = h * state.covariance * h.transpose() + config.measurement_noise;
  const Eigen::LLT<Eigen::Matrix2d> llt(innovation_cov);
  const double scale = innovation_cov.cwiseAbs().maxCoeff();
  if (!innovation_cov.allFinite() || llt.info() != Eigen::Success ||
      !(innovation_cov.determinant() > 1e-24 * scale * scale))
    throw Error(ErrorCode::SingularInnovation, "innovation covariance is singular");

  // K = P H^T S^-1
  const Eigen::Matrix<double, 4, 2> gain = llt.solve(h * state.covariance).transpose();
  const Eigen::Vector2d residual = Eigen::Vector2d(measurement.x, measurement.y) - h * state.mean;
  const Eigen::Matrix4d i_kh = Eigen::Matrix4d::Identity() - gain * h;

  KalmanState out;
  out.mean = state.mean + gain * residual;
  out.covariance = symmetrised(i_kh * state.covariance * i_kh.transpose() +
                               gain * config.measurement_noise * gain.transpose());
  return out;
}

std::vector<TimedState> run_filter(const std::vector<TimedPoint>& measurements, const KalmanConfig& config) {
  config.validate();
  std::vector<TimedState> out;
  out.reserve(measurements.size());
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const TimedPoint& m = measurements[i];
    if (i == 0) {
      KalmanState s;
      s.mean << m.position.x, m.position.y, 0.0, 0.0;
      s.covariance = config.initial_covariance;
      out.push_back({m.t, s});
      continue;
    }
    const double dt = m.t - measurements[i - 1].t;
    if (!(dt > 0.0))
      throw Error(ErrorCode::NonMonotonicTime, "timestamp " + std::to_string(i) + " does not increase");
    out.push_back({m.t, update(predict(out.back().state, dt, config), m.position, config)});
  }
  return out;
}

}  // namespace csiloc
