#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gba/box3d.hpp"
#include "gba/cluster.hpp"
#include "gba/triangulate.hpp"

namespace gba {

struct TruthObject {
  TrackId track_id = 0;
  OrientedBox3D box;  // pose at the first frame
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // meters per frame
  bool moving = false;

  OrientedBox3D box_at(FrameId frame) const;
};

struct TruthPoint {
  PointId point_id = 0;
  TrackId object_id = 0;
  Point3 position = Point3::Zero();  // at the first frame
};

struct SceneTruth {
  std::vector<TruthObject> objects;  // ordered by track_id
  std::vector<TruthPoint> points;    // ordered by point_id

  const TruthObject* object(TrackId id) const;
};

/// Everything the label generator consumes, plus optional ground truth.
struct SceneBundle {
  std::vector<CameraFrame> frames;        // ordered by frame_id
  std::vector<TrackedBox2D> boxes;        // ordered by (track_id, frame_id)
  std::vector<ObservationTrack> tracks;   // ordered by point_id
  std::optional<SceneTruth> truth;

  /// Throws InvalidInput on dangling frame ids or duplicate keys.
  void validate() const;
};

struct SimConfig {
  int n_objects = 15;
  int n_frames = 50;
  double camera_speed = 1.0;   // meters per frame
  double path_curvature = 0.0;  // 1/m
  double camera_height = 1.6;
  double focal_px = 1000.0;
  int image_width = 1920;
  int image_height = 1280;
  std::pair<double, double> length_range{3.8, 5.0};
  std::pair<double, double> width_range{1.7, 2.1};
  std::pair<double, double> height_range{1.4, 1.8};
  std::pair<double, double> lateral_range{4.0, 20.0};  // |offset| from the camera path
  double ahead_margin = 30.0;   // objects may sit this far past the last camera position
  double min_separation = 2.0;  // minimum BEV gap between objects
  double surface_density = 25.0;  // points per square meter
  double pixel_noise = 0.5;
  double moving_fraction = 0.0;
  std::pair<double, double> moving_speed_range{1.0, 2.0};  // meters per frame
  double max_view_distance = 120.0;
  bool occlusion = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic synthetic scene for a given config and seed.
SceneBundle simulate(const SimConfig& cfg);

/// Frame where each track's 2D box is largest (ties: earliest frame).
std::vector<std::pair<TrackId, FrameId>> anchor_frames(std::span<const TrackedBox2D> boxes);

}  // namespace gba
