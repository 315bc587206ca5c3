#pragma once

#include <Eigen/Dense>

#include "bevdrive/geometry.hpp"

namespace bevdrive {

/// Gaussian belief over (x, y, yaw, v).
struct PoseBelief {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();

  Pose2 pose() const { return {{mean(0), mean(1)}, mean(2)}; }
  double speed() const { return mean(3); }
};

struct EkfParams {
  double q_pos = 0.05;   // process noise spectral density, position
  double q_yaw = 0.02;
  double q_speed = 0.5;
  double r_gnss = 0.5;   // GNSS position std, m
  double r_imu = 0.01;   // IMU yaw std, rad
};

inline bool covariancePsd(const Eigen::Matrix4d& c, double tol = 1e-9) {
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-6) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(c);
  return es.eigenvalues().minCoeff() > -tol;
}

/// Constant-velocity-and-yaw predict followed by a joint GNSS + IMU yaw
/// update (Joseph form keeps the covariance PSD).
inline PoseBelief ekfStep(const PoseBelief& belief, const Vec2& gnss, double imu_yaw,
                          double dt, const EkfParams& prm = {}) {
  if (!covariancePsd(belief.cov))
    throw std::invalid_argument("ekf_step: covariance not PSD");

  const double yaw = belief.mean(2), v = belief.mean(3);

  // Predict.
  Eigen::Vector4d x = belief.mean;
  x(0) += v * std::cos(yaw) * dt;
  x(1) += v * std::sin(yaw) * dt;

  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = -v * std::sin(yaw) * dt;
  F(0, 3) = std::cos(yaw) * dt;
  F(1, 2) = v * std::cos(yaw) * dt;
  F(1, 3) = std::sin(yaw) * dt;

  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  Q(0, 0) = Q(1, 1) = prm.q_pos * dt;
  Q(2, 2) = prm.q_yaw * dt;
  Q(3, 3) = prm.q_speed * dt;

  Eigen::Matrix4d P = F * belief.cov * F.transpose() + Q;

  // Update with z = [gnss_x, gnss_y, imu_yaw].
  Eigen::Matrix<double, 3, 4> H = Eigen::Matrix<double, 3, 4>::Zero();
  H(0, 0) = H(1, 1) = H(2, 2) = 1.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
  R(0, 0) = R(1, 1) = prm.r_gnss * prm.r_gnss;
  R(2, 2) = prm.r_imu * prm.r_imu;

  Eigen::Vector3d innov;
  innov << gnss.x - x(0), gnss.y - x(1), wrapAngle(imu_yaw - x(2));

  const Eigen::Matrix3d S = H * P * H.transpose() + R;
  const Eigen::Matrix<double, 4, 3> K = P * H.transpose() * S.inverse();

  PoseBelief out;
  out.mean = x + K * innov;
  out.mean(2) = wrapAngle(out.mean(2));
  const Eigen::Matrix4d IKH = Eigen::Matrix4d::Identity() - K * H;
  out.cov = IKH * P * IKH.transpose() + K * R * K.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

}  // namespace bevdrive
