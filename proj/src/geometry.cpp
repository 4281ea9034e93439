// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "enerf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "enerf/common.hpp"

namespace enerf {

Rotation::Rotation(double w, double x, double y, double z) : q_(w, x, y, z) {
  const double n = q_.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("Rotation: quaternion norm must be positive and finite");
  }
  q_.coeffs() /= n;
}

Rotation::Rotation(const Eigen::Quaterniond& q) : Rotation(q.w(), q.x(), q.y(), q.z()) {}

Rotation Rotation::from_axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized())));
}

double Rotation::angle_to(const Rotation& other) const {
  const double d = std::min(1.0, std::abs(q_.dot(other.q_)));
  return 2.0 * std::acos(d);
}

Rotation slerp(const Rotation& q0, const Rotation& q1, double s) {
  Eigen::Quaterniond a = q0.quat();
  Eigen::Quaterniond b = q1.quat();
  double dot = a.dot(b);
  if (dot < 0.0) {  // shortest path
    b.coeffs() = -b.coeffs();
    dot = -dot;
  }
  if (dot > 1.0 - 1e-10) {
    // Nearly identical rotations: sin(theta) ~ 0, use nlerp.
    Eigen::Quaterniond r;
    r.coeffs() = (1.0 - s) * a.coeffs() + s * b.coeffs();
    r.normalize();
    return Rotation(r);
  }
  const double theta = std::acos(std::min(1.0, dot));
  const double sin_theta = std::sin(theta);
  const double wa = std::sin((1.0 - s) * theta) / sin_theta;
  const double wb = std::sin(s * theta) / sin_theta;
  Eigen::Quaterniond r;
  r.coeffs() = wa * a.coeffs() + wb * b.coeffs();
  r.normalize();
  return Rotation(r);
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.inverse();
  inv.translation = -inv.rotation.rotate(translation);
  return inv;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation.rotate(rhs.translation) + translation;
  return out;
}

Trajectory::Trajectory(std::vector<TrajectorySample> samples) : samples_(std::move(samples)) {
  if (samples_.size() < 4) {
    throw std::invalid_argument("Trajectory: need at least 4 samples, got " +
                                std::to_string(samples_.size()));
  }
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (samples_[i].t_us <= samples_[i - 1].t_us) {
      throw std::invalid_argument("Trajectory: timestamps must be strictly increasing at index " +
                                  std::to_string(i));
    }
  }
}

Trajectory Trajectory::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("Trajectory::load: cannot open " + path.string());
  std::vector<TrajectorySample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long t = 0;
    double tx, ty, tz, qw, qx, qy, qz;
    if (!(ss >> t >> tx >> ty >> tz >> qw >> qx >> qy >> qz)) {
      throw DataFormatError("Trajectory::load: malformed record at " + path.string() + ":" +
                            std::to_string(line_no));
    }
    TrajectorySample s;
    s.t_us = t;
    s.pose.rotation = Rotation(qw, qx, qy, qz);
    s.pose.translation = Eigen::Vector3d(tx, ty, tz);
    samples.push_back(s);
  }
  try {
    return Trajectory(std::move(samples));
  } catch (const std::invalid_argument& e) {
    throw DataFormatError("Trajectory::load: " + path.string() + ": " + e.what());
  }
}

void Trajectory::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataFormatError("Trajectory::save: cannot open " + path.string());
  char buf[256];
  for (const auto& s : samples_) {
    const auto& q = s.pose.rotation.quat();
    std::snprintf(buf, sizeof(buf), "%lld %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  static_cast<long long>(s.t_us), s.pose.translation.x(), s.pose.translation.y(),
                  s.pose.translation.z(), q.w(), q.x(), q.y(), q.z());
    out << buf;
  }
}

namespace {

// Centripetal Catmull-Rom segment between p1 and p2 at fraction s in [0, 1].
// Knot spacing by sqrt of chord length; duplicate control points (phantom
// boundary knots) collapse to exact endpoint interpolation because every
// blend is written in lerp form.
Eigen::Vector3d catmull_rom_centripetal(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                                        const Eigen::Vector3d& p2, const Eigen::Vector3d& p3,
                                        double s) {
  constexpr double kAlpha = 0.5;
  constexpr double kMinKnot = 1e-9;
  const double d0 = std::max(std::pow((p1 - p0).norm(), kAlpha), kMinKnot);
  const double d1 = std::max(std::pow((p2 - p1).norm(), kAlpha), kMinKnot);
  const double d2 = std::max(std::pow((p3 - p2).norm(), kAlpha), kMinKnot);
  const double t0 = 0.0;
  const double t1 = t0 + d0;
  const double t2 = t1 + d1;
  const double t3 = t2 + d2;
  const double u = t1 + s * (t2 - t1);

  const auto lerp = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b, double w) {
    return (a + w * (b - a)).eval();
  };
  const Eigen::Vector3d a1 = lerp(p0, p1, (u - t0) / (t1 - t0));
  const Eigen::Vector3d a2 = lerp(p1, p2, (u - t1) / (t2 - t1));
  const Eigen::Vector3d a3 = lerp(p2, p3, (u - t2) / (t3 - t2));
  const Eigen::Vector3d b1 = lerp(a1, a2, (u - t0) / (t2 - t0));
  const Eigen::Vector3d b2 = lerp(a2, a3, (u - t1) / (t3 - t1));
  return lerp(b1, b2, (u - t1) / (t2 - t1));
}

}  // namespace

Pose interpolate_pose(const Trajectory& traj, std::int64_t t_us) {
  const auto& samples = traj.samples();
  if (t_us < traj.t_begin() || t_us > traj.t_end()) {
    throw std::out_of_range("interpolate_pose: t=" + std::to_string(t_us) +
                            " outside trajectory range [" + std::to_string(traj.t_begin()) + ", " +
                            std::to_string(traj.t_end()) + "] us");
  }
  // Bracketing segment [i, i+1] with t in [t_i, t_{i+1}).
  const auto it = std::upper_bound(samples.begin(), samples.end(), t_us,
                                   [](std::int64_t t, const TrajectorySample& s) { return t < s.t_us; });
  std::size_t i = static_cast<std::size_t>(it - samples.begin());
  if (i == 0) i = 1;  // t == t_begin
  --i;
  if (i >= samples.size() - 1) i = samples.size() - 2;  // t == t_end

  const TrajectorySample& s1 = samples[i];
  const TrajectorySample& s2 = samples[i + 1];
  if (t_us == s1.t_us) return s1.pose;
  if (t_us == s2.t_us) return s2.pose;

  const double s = static_cast<double>(t_us - s1.t_us) / static_cast<double>(s2.t_us - s1.t_us);

  const Eigen::Vector3d p0 = (i == 0) ? s1.pose.translation : samples[i - 1].pose.translation;
  const Eigen::Vector3d p3 =
      (i + 2 >= samples.size()) ? s2.pose.translation : samples[i + 2].pose.translation;

  Pose out;
  out.rotation = slerp(s1.pose.rotation, s2.pose.rotation, s);
  out.translation = catmull_rom_centripetal(p0, s1.pose.translation, s2.pose.translation, p3, s);
  return out;
}

void CameraModel::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("CameraModel: width/height must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("CameraModel: fx/fy must be positive");
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
    throw ConfigError("CameraModel: principal point must lie inside the sensor");
  }
}

Eigen::Vector2d CameraModel::distort(const Eigen::Vector2d& n) const {
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + distortion.k1 * r2 + distortion.k2 * r2 * r2;
  const double dx = 2.0 * distortion.p1 * x * y + distortion.p2 * (r2 + 2.0 * x * x);
  const double dy = distortion.p1 * (r2 + 2.0 * y * y) + 2.0 * distortion.p2 * x * y;
  return {x * radial + dx, y * radial + dy};
}

Eigen::Vector2d CameraModel::undistort(const Eigen::Vector2d& distorted) const {
  if (distortion.is_zero()) return distorted;
  constexpr int kMaxIterations = 10;
  const double tol_px = 1e-8;
  const double scale = std::max(fx, fy);
  Eigen::Vector2d u = distorted;
  for (int it = 0; it < kMaxIterations; ++it) {
    const Eigen::Vector2d residual = distort(u) - distorted;
    u -= residual;
    if (residual.norm() * scale < tol_px) return u;
  }
  if ((distort(u) - distorted).norm() * scale < tol_px) return u;
  throw NumericError("CameraModel::undistort: fixed-point iteration did not converge");
}

Ray backproject(const CameraModel& cam, const Pose& world_from_cam, const Eigen::Vector2d& pixel,
                double near, double far) {
  if (!(near > 0.0) || !(far > near)) {
    throw std::invalid_argument("backproject: require 0 < near < far");
  }
  const Eigen::Vector2d distorted((pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy);
  const Eigen::Vector2d n = cam.undistort(distorted);
  Ray ray;
  ray.origin = world_from_cam.translation;
  ray.direction = world_from_cam.rotation.rotate(Eigen::Vector3d(n.x(), n.y(), 1.0).normalized());
  ray.near = near;
  ray.far = far;
  return ray;
}

Eigen::Vector2d project(const CameraModel& cam, const Pose& world_from_cam,
                        const Eigen::Vector3d& point_world) {
  const Eigen::Vector3d p_cam = world_from_cam.inverse().apply(point_world);
  if (!(p_cam.z() > 0.0)) {
    throw std::domain_error("project: point is not in front of the camera");
  }
  const Eigen::Vector2d d = cam.distort({p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z()});
  return {cam.fx * d.x() + cam.cx, cam.fy * d.y() + cam.cy};
}

}  // namespace enerf
