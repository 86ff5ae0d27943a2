#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gba/geom.hpp"

namespace gba {

struct Observation {
  FrameId frame_id = 0;
  Pixel2 pixel;
};

struct ObservationTrack {
  PointId point_id = 0;
  std::vector<Observation> observations;
};

struct WorldPoint {
  PointId point_id = 0;
  Point3 position = Point3::Zero();
  double residual_rms = 0.0;  // pixels
  int n_views = 0;
};

struct BaConfig {
  int max_iterations = 50;
  double cost_tolerance = 1e-12;  // relative decrease that ends the solve
  double initial_damping = 1e-3;
  double damping_scale = 10.0;
  int min_views = 2;
  double max_residual_px = 3.0;
  double parallax_min_baseline_m = 0.5;

  void validate() const;
};

/// Id-indexed view over a list of frames.
class FrameIndex {
 public:
  explicit FrameIndex(std::span<const CameraFrame> frames);
  const CameraFrame* find(FrameId id) const;
  const CameraFrame& at(FrameId id) const;
  std::span<const CameraFrame> frames() const { return frames_; }

 private:
  std::span<const CameraFrame> frames_;
  std::unordered_map<FrameId, std::size_t> by_id_;
};

/// Homogeneous DLT intersection of the track's viewing rays.
/// Throws InsufficientViews, DegenerateGeometry or CheiralityFailure.
Point3 triangulate_dlt(const ObservationTrack& track, const FrameIndex& frames);

/// Observed minus projected pixel, and d(residual)/d(point).
struct Reprojection {
  Eigen::Vector2d residual;
  Eigen::Matrix<double, 2, 3> jacobian;
};

/// Throws Error(BehindCamera) when the point is not in front of the camera.
Reprojection reprojection(const CameraFrame& frame, const Point3& point, const Pixel2& observed);

/// (1/2) * sum of squared reprojection residuals; +inf if any view sees the point behind it.
double reprojection_cost(const ObservationTrack& track, const FrameIndex& frames,
                         const Point3& point);

enum class PointStatus {
  Ok,
  HighResidual,
  SingularNormalEquations,
  BehindCamera,
  InsufficientViews,
  DegenerateGeometry,
  CheiralityFailure,
};

std::string_view to_string(PointStatus status);

struct PointRefinement {
  WorldPoint point;
  PointStatus status = PointStatus::Ok;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  std::vector<double> accepted_costs;  // cost after every accepted step, initial cost first
};

/// Damped Gauss-Newton (Levenberg) on one point with every pose held fixed.
PointRefinement refine_point(const WorldPoint& initial, const ObservationTrack& track,
                             const FrameIndex& frames, const BaConfig& cfg);

struct DroppedPoint {
  PointId point_id = 0;
  PointStatus reason = PointStatus::Ok;
};

struct RefineResult {
  std::vector<WorldPoint> points;  // kept, ordered by point_id
  std::vector<DroppedPoint> dropped;  // ordered by point_id
  std::vector<PointRefinement> details;  // one per input point, input order
};

/// Refines each point independently. Points with fewer than cfg.min_views
/// observations, numerical failures, or final RMS above cfg.max_residual_px
/// are dropped.
RefineResult refine_points(std::span<const WorldPoint> points,
                           std::span<const ObservationTrack> tracks, const FrameIndex& frames,
                           const BaConfig& cfg);

struct InitResult {
  std::vector<WorldPoint> points;  // ordered by point_id
  std::vector<DroppedPoint> dropped;
};

/// DLT initialization for every track, with the RMS residual of the initial point.
InitResult initialize_points(std::span<const ObservationTrack> tracks, const FrameIndex& frames,
                             const BaConfig& cfg);

/// False (skip reconstruction) iff the widest camera-center spread is below
/// cfg.parallax_min_baseline_m.
bool parallax_gate(std::span<const CameraFrame> frames, const BaConfig& cfg);

}  // namespace gba
