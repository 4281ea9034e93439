// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace enerf {

/// Unit quaternion. Construction and interpolation renormalize, so the norm
/// invariant holds to 1e-9 at all times. q and -q represent the same rotation.
class Rotation {
 public:
  Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}
  Rotation(double w, double x, double y, double z);
  explicit Rotation(const Eigen::Quaterniond& q);

  static Rotation from_axis_angle(const Eigen::Vector3d& axis, double angle_rad);

  const Eigen::Quaterniond& quat() const { return q_; }
  Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }
  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const { return q_ * v; }
  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Rotation operator*(const Rotation& rhs) const { return Rotation(q_ * rhs.q_); }

  /// Relative rotation angle in [0, pi]; insensitive to the sign of either
  /// quaternion (double cover).
  double angle_to(const Rotation& other) const;

  bool approx_equal(const Rotation& other, double tol = 1e-9) const {
    return angle_to(other) <= tol;
  }

 private:
  Eigen::Quaterniond q_;
};

/// Geodesic interpolation between rotations, shortest path. Near-identical
/// inputs (|dot| > 1 - 1e-10) fall back to normalized linear interpolation.
Rotation slerp(const Rotation& q0, const Rotation& q1, double s);

/// Rigid transform, stored as world_from_camera when used for camera poses:
/// translation is the camera position in world coordinates.
struct Pose {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation.rotate(p) + translation; }
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;
};

struct TrajectorySample {
  std::int64_t t_us = 0;
  Pose pose;
};

/// Time-indexed pose sequence. At least 4 samples with strictly increasing
/// timestamps (cubic translation interpolation needs 4 support points).
class Trajectory {
 public:
  explicit Trajectory(std::vector<TrajectorySample> samples);

  /// Text format: one record per line, `t_us tx ty tz qw qx qy qz`.
  static Trajectory load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::vector<TrajectorySample>& samples() const { return samples_; }
  std::int64_t t_begin() const { return samples_.front().t_us; }
  std::int64_t t_end() const { return samples_.back().t_us; }

 private:
  std::vector<TrajectorySample> samples_;
};

/// Pose at time t: rotation by slerp between the bracketing samples,
/// translation by a centripetal Catmull-Rom segment through the 4 neighboring
/// samples (boundary knots are duplicated as phantom support points).
/// Throws std::out_of_range for t outside [t_begin, t_end].
Pose interpolate_pose(const Trajectory& traj, std::int64_t t_us);

struct RadialTangential {
  double k1 = 0.0, k2 = 0.0, p1 = 0.0, p2 = 0.0;
  bool is_zero() const { return k1 == 0.0 && k2 == 0.0 && p1 == 0.0 && p2 == 0.0; }
};

/// Pinhole camera with radial-tangential distortion.
struct CameraModel {
  int width = 0;
  int height = 0;
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  RadialTangential distortion;

  void validate() const;

  /// Applies the distortion model to a normalized image-plane point.
  Eigen::Vector2d distort(const Eigen::Vector2d& normalized) const;

  /// Inverts the distortion by fixed-point iteration (10 iterations,
  /// 1e-8 px tolerance). Throws NumericError if it fails to converge.
  Eigen::Vector2d undistort(const Eigen::Vector2d& normalized_distorted) const;
};

struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();  // unit norm
  double near = 0.0;
  double far = 0.0;

  Eigen::Vector3d point_at(double t) const { return origin + t * direction; }
};

/// Pixel (continuous coordinates) to world-space ray through the camera at
/// `world_from_cam`. The pixel is undistorted, lifted to the normalized image
/// plane, and rotated into the world frame.
Ray backproject(const CameraModel& cam, const Pose& world_from_cam, const Eigen::Vector2d& pixel,
                double near, double far);

/// Forward projection of a world point to distorted pixel coordinates.
/// Throws std::domain_error for points at or behind the camera plane.
Eigen::Vector2d project(const CameraModel& cam, const Pose& world_from_cam,
                        const Eigen::Vector3d& point_world);

}  // namespace enerf
