#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>

namespace gba {

using PointId = std::int64_t;
using FrameId = std::int64_t;
using TrackId = std::int64_t;

/// World points in meters. Camera frames use +z forward, +x right, +y down.
using Point3 = Eigen::Vector3d;

struct Pixel2 {
  double u = 0.0;
  double v = 0.0;
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws Error(InvalidCamera) if focal lengths or principal point are out of range.
  void validate() const;
};

/// Rigid world-to-camera transform: x_cam = R * x_world + t.
class Pose {
 public:
  Pose() = default;
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose identity() { return {}; }
  /// Camera looking along `forward` from `center`, with `up` used to fix roll.
  static Pose look_along(const Point3& center, const Eigen::Vector3d& forward,
                         const Eigen::Vector3d& world_up);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Vector3d apply(const Point3& world) const { return rotation_ * world + translation_; }
  Point3 camera_center() const { return -rotation_.transpose() * translation_; }
  Pose inverse() const;

  /// Orthonormality and det(R) = +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

/// (a * b).apply(x) == a.apply(b.apply(x))
Pose operator*(const Pose& a, const Pose& b);

struct Box2D {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;

  bool is_valid() const { return u_min < u_max && v_min < v_max; }
  double area() const { return (u_max - u_min) * (v_max - v_min); }
};

struct CameraFrame {
  FrameId frame_id = 0;
  CameraIntrinsics intrinsics;
  Pose pose;
};

inline constexpr double kMinProjectionDepth = 1e-6;

/// Pinhole projection. Throws Error(BehindCamera) when the camera-frame depth is <= 1e-6.
Pixel2 project(const Pose& pose, const Point3& point, const CameraIntrinsics& k);

/// Non-throwing projection for hot loops; empty when the point is behind the camera.
std::optional<Pixel2> try_project(const Pose& pose, const Point3& point,
                                  const CameraIntrinsics& k);

/// Point at camera-frame depth `depth` along the ray through `pixel`.
Point3 backproject(const Pose& pose, const Pixel2& pixel, double depth,
                   const CameraIntrinsics& k);

/// Closed on all four edges.
bool pixel_in_box(const Pixel2& p, const Box2D& b);

/// Camera-frame z of a world point.
inline double camera_depth(const Pose& pose, const Point3& point) {
  return pose.rotation().row(2).dot(point) + pose.translation().z();
}

}  // namespace gba
