#include "gba/geom.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <string>

#include "gba/error.hpp"

namespace gba {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::InvalidCamera: return "InvalidCamera";
    case ErrorCode::InsufficientViews: return "InsufficientViews";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::CheiralityFailure: return "CheiralityFailure";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::DegenerateCluster: return "DegenerateCluster";
    case ErrorCode::InvalidBox: return "InvalidBox";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::InvalidCamera, "focal lengths must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::InvalidCamera, "principal point outside the image");
  }
}

Pose Pose::look_along(const Point3& center, const Eigen::Vector3d& forward,
                      const Eigen::Vector3d& world_up) {
  const Eigen::Vector3d z = forward.normalized();
  const Eigen::Vector3d x = z.cross(world_up).normalized();  // right
  const Eigen::Vector3d y = z.cross(x);                      // down
  Eigen::Matrix3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return Pose(r, -r * center);
}

Pose Pose::inverse() const {
  const Eigen::Matrix3d rt = rotation_.transpose();
  return Pose(rt, -rt * translation_);
}

bool Pose::is_valid(double tol) const {
  if (!rotation_.allFinite() || !translation_.allFinite()) return false;
  const double ortho = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  return ortho <= tol && std::abs(rotation_.determinant() - 1.0) <= tol;
}

Pose operator*(const Pose& a, const Pose& b) {
  return Pose(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

std::optional<Pixel2> try_project(const Pose& pose, const Point3& point,
                                  const CameraIntrinsics& k) {
  const Eigen::Vector3d c = pose.apply(point);
  if (!(c.z() > kMinProjectionDepth)) return std::nullopt;
  return Pixel2{k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy};
}

Pixel2 project(const Pose& pose, const Point3& point, const CameraIntrinsics& k) {
  auto px = try_project(pose, point, k);
  if (!px) throw Error(ErrorCode::BehindCamera, "point has non-positive camera depth");
  return *px;
}

Point3 backproject(const Pose& pose, const Pixel2& pixel, double depth,
                   const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "depth must be positive");
  const Eigen::Vector3d cam((pixel.u - k.cx) / k.fx * depth, (pixel.v - k.cy) / k.fy * depth,
                            depth);
  return pose.rotation().transpose() * (cam - pose.translation());
}

bool pixel_in_box(const Pixel2& p, const Box2D& b) {
  return p.u >= b.u_min && p.u <= b.u_max && p.v >= b.v_min && p.v <= b.v_max;
}

}  // namespace gba
