#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>

#include "gba/geom.hpp"

namespace gba {

/// 7-DoF box in the z-up world frame. `length` runs along the heading
/// (cos yaw, sin yaw), `width` across it, `height` along z.
struct OrientedBox3D {
  Point3 center = Point3::Zero();
  double width = 0.0;
  double height = 0.0;
  double length = 0.0;
  double yaw = 0.0;
  double score = 1.0;
  std::optional<TrackId> track_id;
  std::string class_label = "VEHICLE";
  bool has_3d = true;  // false: 2D-only label, its 3D geometry is ignored

  double volume() const { return width * height * length; }
  double z_min() const { return center.z() - 0.5 * height; }
  double z_max() const { return center.z() + 0.5 * height; }

  /// BEV footprint corners, counter-clockwise.
  std::array<Eigen::Vector2d, 4> bev_corners() const;
  /// All 8 corners, bottom face first.
  std::array<Point3, 8> corners() const;
  /// Point containment, closed.
  bool contains(const Point3& p) const;

  bool operator==(const OrientedBox3D&) const = default;
};

/// Wraps an angle to [0, pi).
double wrap_half_turn(double angle);
/// Wraps an angle to [-pi, pi).
double wrap_full_turn(double angle);

}  // namespace gba
