#include "gba/triangulate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "gba/error.hpp"
#include "gba/parallel.hpp"

namespace gba {
namespace {

constexpr double kParallelRayAngle = 1e-8;
constexpr double kMaxDamping = 1e16;
constexpr int kMaxSingularRetries = 10;

// One observation per distinct frame; later duplicates of a frame are ignored.
std::vector<std::pair<const CameraFrame*, Pixel2>> usable_views(const ObservationTrack& track,
                                                                 const FrameIndex& frames) {
  std::vector<std::pair<const CameraFrame*, Pixel2>> views;
  views.reserve(track.observations.size());
  for (const auto& obs : track.observations) {
    const CameraFrame* frame = frames.find(obs.frame_id);
    if (frame == nullptr) continue;
    const bool seen = std::any_of(views.begin(), views.end(),
                                  [&](const auto& v) { return v.first->frame_id == obs.frame_id; });
    if (!seen) views.emplace_back(frame, obs.pixel);
  }
  return views;
}

int distinct_frames(const ObservationTrack& track) {
  std::vector<FrameId> ids;
  ids.reserve(track.observations.size());
  for (const auto& obs : track.observations) ids.push_back(obs.frame_id);
  std::sort(ids.begin(), ids.end());
  return static_cast<int>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

PointStatus status_from(ErrorCode code) {
  switch (code) {
    case ErrorCode::InsufficientViews: return PointStatus::InsufficientViews;
    case ErrorCode::DegenerateGeometry: return PointStatus::DegenerateGeometry;
    case ErrorCode::CheiralityFailure: return PointStatus::CheiralityFailure;
    case ErrorCode::BehindCamera: return PointStatus::BehindCamera;
    case ErrorCode::SingularNormalEquations: return PointStatus::SingularNormalEquations;
    default: return PointStatus::DegenerateGeometry;
  }
}

}  // namespace

std::string_view to_string(PointStatus status) {
  switch (status) {
    case PointStatus::Ok: return "ok";
    case PointStatus::HighResidual: return "high_residual";
    case PointStatus::SingularNormalEquations: return "singular_normal_equations";
    case PointStatus::BehindCamera: return "behind_camera";
    case PointStatus::InsufficientViews: return "insufficient_views";
    case PointStatus::DegenerateGeometry: return "degenerate_geometry";
    case PointStatus::CheiralityFailure: return "cheirality_failure";
  }
  return "unknown";
}

void BaConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::ConfigError, "max_iterations must be >= 1");
  if (!(cost_tolerance > 0.0) || !(initial_damping > 0.0) || !(damping_scale > 1.0)) {
    throw Error(ErrorCode::ConfigError, "solver tolerances must be positive");
  }
  if (min_views < 2) throw Error(ErrorCode::ConfigError, "min_views must be >= 2");
  if (!(max_residual_px > 0.0) || !(parallax_min_baseline_m >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "thresholds must be positive");
  }
}

FrameIndex::FrameIndex(std::span<const CameraFrame> frames) : frames_(frames) {
  for (std::size_t i = 0; i < frames.size(); ++i) by_id_.emplace(frames[i].frame_id, i);
}

const CameraFrame* FrameIndex::find(FrameId id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &frames_[it->second];
}

const CameraFrame& FrameIndex::at(FrameId id) const {
  const CameraFrame* f = find(id);
  if (f == nullptr) throw Error(ErrorCode::InvalidInput, "unknown frame id " + std::to_string(id));
  return *f;
}

Point3 triangulate_dlt(const ObservationTrack& track, const FrameIndex& frames) {
  const auto views = usable_views(track, frames);
  if (views.size() < 2) {
    throw Error(ErrorCode::InsufficientViews,
                "point " + std::to_string(track.point_id) + " has < 2 distinct views");
  }

  // World-space viewing directions, used for the parallel-ray test.
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(views.size());
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& [frame, px] : views) {
    const auto& k = frame->intrinsics;
    const Eigen::Vector3d ray((px.u - k.cx) / k.fx, (px.v - k.cy) / k.fy, 1.0);
    dirs.push_back((frame->pose.rotation().transpose() * ray).normalized());
    centroid += frame->pose.camera_center();
  }
  centroid /= static_cast<double>(views.size());

  double max_angle = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      max_angle = std::max(max_angle, std::atan2(dirs[i].cross(dirs[j]).norm(), dirs[i].dot(dirs[j])));
    }
  }
  if (max_angle < kParallelRayAngle) {
    throw Error(ErrorCode::DegenerateGeometry, "viewing rays are parallel");
  }

  // Conditioning: express the point relative to the camera centroid, scaled
  // by the camera spread.
  double spread = 0.0;
  for (const auto& [frame, px] : views) spread += (frame->pose.camera_center() - centroid).norm();
  spread = std::max(spread / static_cast<double>(views.size()), 1e-3);

  Eigen::MatrixXd a(2 * views.size(), 4);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& [frame, px] = views[i];
    const auto& k = frame->intrinsics;
    const Eigen::Matrix3d& r = frame->pose.rotation();
    // x_cam = R * (centroid + spread * y) + t
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = r * spread;
    p.col(3) = r * centroid + frame->pose.translation();
    const double xn = (px.u - k.cx) / k.fx;
    const double yn = (px.v - k.cy) / k.fy;
    Eigen::RowVector4d r0 = xn * p.row(2) - p.row(0);
    Eigen::RowVector4d r1 = yn * p.row(2) - p.row(1);
    a.row(2 * i) = r0 / std::max(r0.norm(), 1e-300);
    a.row(2 * i + 1) = r1 / std::max(r1.norm(), 1e-300);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h(3)) <= 1e-14 * h.head<3>().norm()) {
    throw Error(ErrorCode::DegenerateGeometry, "triangulated point at infinity");
  }
  const Point3 point = centroid + spread * (h.head<3>() / h(3));

  int in_front = 0;
  for (const auto& [frame, px] : views) {
    if (camera_depth(frame->pose, point) > kMinProjectionDepth) ++in_front;
  }
  if (in_front < 2) {
    throw Error(ErrorCode::CheiralityFailure,
                "point " + std::to_string(track.point_id) + " is not in front of two cameras");
  }
  return point;
}

Reprojection reprojection(const CameraFrame& frame, const Point3& point, const Pixel2& observed) {
  const auto& k = frame.intrinsics;
  const Eigen::Matrix3d& r = frame.pose.rotation();
  const Eigen::Vector3d c = frame.pose.apply(point);
  if (!(c.z() > kMinProjectionDepth)) {
    throw Error(ErrorCode::BehindCamera, "point behind camera " + std::to_string(frame.frame_id));
  }
  const double iz = 1.0 / c.z();
  Reprojection out;
  out.residual = Eigen::Vector2d(observed.u - (k.fx * c.x() * iz + k.cx),
                                 observed.v - (k.fy * c.y() * iz + k.cy));
  Eigen::Matrix<double, 2, 3> dproj;
  dproj << k.fx * iz, 0.0, -k.fx * c.x() * iz * iz,
           0.0, k.fy * iz, -k.fy * c.y() * iz * iz;
  out.jacobian = -dproj * r;
  return out;
}

double reprojection_cost(const ObservationTrack& track, const FrameIndex& frames,
                         const Point3& point) {
  double cost = 0.0;
  for (const auto& [frame, px] : usable_views(track, frames)) {
    auto proj = try_project(frame->pose, point, frame->intrinsics);
    if (!proj) return std::numeric_limits<double>::infinity();
    const double du = px.u - proj->u;
    const double dv = px.v - proj->v;
    cost += du * du + dv * dv;
  }
  return 0.5 * cost;
}

PointRefinement refine_point(const WorldPoint& initial, const ObservationTrack& track,
                             const FrameIndex& frames, const BaConfig& cfg) {
  PointRefinement out;
  out.point = initial;
  const auto views = usable_views(track, frames);
  out.point.n_views = static_cast<int>(views.size());
  if (static_cast<int>(views.size()) < cfg.min_views) {
    out.status = PointStatus::InsufficientViews;
    return out;
  }

  Point3 x = initial.position;
  double cost = reprojection_cost(track, frames, x);
  out.initial_cost = cost;
  out.final_cost = cost;
  if (!std::isfinite(cost)) {
    out.status = PointStatus::BehindCamera;
    return out;
  }
  out.accepted_costs.push_back(cost);

  double lambda = cfg.initial_damping;
  int singular_retries = 0;
  while (out.iterations < cfg.max_iterations && cost > 0.0) {
    ++out.iterations;
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (const auto& [frame, px] : views) {
      const Reprojection rp = reprojection(*frame, x, px);
      h.noalias() += rp.jacobian.transpose() * rp.jacobian;
      g.noalias() += rp.jacobian.transpose() * rp.residual;
    }
    const Eigen::Matrix3d damped = h + lambda * Eigen::Matrix3d::Identity();
    Eigen::LDLT<Eigen::Matrix3d> ldlt(damped);
    const Eigen::Vector3d step = ldlt.solve(-g);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !step.allFinite()) {
      if (++singular_retries > kMaxSingularRetries) {
        out.status = PointStatus::SingularNormalEquations;
        out.point.position = x;
        out.final_cost = cost;
        return out;
      }
      lambda *= cfg.damping_scale;
      continue;
    }
    singular_retries = 0;

    const Point3 candidate = x + step;
    const double candidate_cost = reprojection_cost(track, frames, candidate);
    if (candidate_cost < cost) {
      const double relative_decrease = (cost - candidate_cost) / cost;
      x = candidate;
      cost = candidate_cost;
      out.accepted_costs.push_back(cost);
      lambda = std::max(lambda / cfg.damping_scale, 1e-12);
      if (relative_decrease < cfg.cost_tolerance) break;
    } else {
      lambda *= cfg.damping_scale;
      if (lambda > kMaxDamping) break;
    }
  }

  out.point.position = x;
  out.final_cost = cost;
  out.point.residual_rms = std::sqrt(2.0 * cost / static_cast<double>(views.size()));
  out.status = out.point.residual_rms > cfg.max_residual_px ? PointStatus::HighResidual
                                                             : PointStatus::Ok;
  return out;
}

RefineResult refine_points(std::span<const WorldPoint> points,
                           std::span<const ObservationTrack> tracks, const FrameIndex& frames,
                           const BaConfig& cfg) {
  std::unordered_map<PointId, std::size_t> track_of;
  track_of.reserve(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) track_of.emplace(tracks[i].point_id, i);

  RefineResult result;
  result.details.resize(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    auto it = track_of.find(points[i].point_id);
    if (it == track_of.end()) {
      result.details[i].point = points[i];
      result.details[i].status = PointStatus::InsufficientViews;
      return;
    }
    result.details[i] = refine_point(points[i], tracks[it->second], frames, cfg);
  });

  for (const auto& d : result.details) {
    if (d.status == PointStatus::Ok) {
      result.points.push_back(d.point);
    } else {
      result.dropped.push_back({d.point.point_id, d.status});
    }
  }
  std::sort(result.points.begin(), result.points.end(),
            [](const auto& a, const auto& b) { return a.point_id < b.point_id; });
  std::sort(result.dropped.begin(), result.dropped.end(),
            [](const auto& a, const auto& b) { return a.point_id < b.point_id; });
  return result;
}

InitResult initialize_points(std::span<const ObservationTrack> tracks, const FrameIndex& frames,
                             const BaConfig& cfg) {
  std::vector<std::optional<WorldPoint>> init(tracks.size());
  std::vector<PointStatus> status(tracks.size(), PointStatus::Ok);
  parallel_for(tracks.size(), [&](std::size_t i) {
    const ObservationTrack& track = tracks[i];
    if (distinct_frames(track) < cfg.min_views) {
      status[i] = PointStatus::InsufficientViews;
      return;
    }
    try {
      WorldPoint wp;
      wp.point_id = track.point_id;
      wp.position = triangulate_dlt(track, frames);
      wp.n_views = static_cast<int>(usable_views(track, frames).size());
      const double cost = reprojection_cost(track, frames, wp.position);
      if (!std::isfinite(cost)) {
        status[i] = PointStatus::BehindCamera;
        return;
      }
      wp.residual_rms = std::sqrt(2.0 * cost / wp.n_views);
      init[i] = wp;
    } catch (const Error& e) {
      status[i] = status_from(e.code());
    }
  });

  InitResult out;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (init[i]) {
      out.points.push_back(*init[i]);
    } else {
      out.dropped.push_back({tracks[i].point_id, status[i]});
    }
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const auto& a, const auto& b) { return a.point_id < b.point_id; });
  std::sort(out.dropped.begin(), out.dropped.end(),
            [](const auto& a, const auto& b) { return a.point_id < b.point_id; });
  return out;
}

bool parallax_gate(std::span<const CameraFrame> frames, const BaConfig& cfg) {
  double widest = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Point3 ci = frames[i].pose.camera_center();
    for (std::size_t j = i + 1; j < frames.size(); ++j) {
      widest = std::max(widest, (ci - frames[j].pose.camera_center()).norm());
    }
  }
  return !(widest < cfg.parallax_min_baseline_m);
}

}  // namespace gba
