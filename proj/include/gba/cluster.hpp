#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gba/geom.hpp"
#include "gba/triangulate.hpp"

namespace gba {

struct TrackedBox2D {
  TrackId track_id = 0;
  FrameId frame_id = 0;
  Box2D box;
  std::string class_label = "VEHICLE";
};

enum class ClusterSource { LPC, GPC };

struct ObjectCluster {
  std::vector<PointId> member_point_ids;  // ascending, unique
  std::vector<Point3> points;             // parallel to member_point_ids
  ClusterSource source = ClusterSource::GPC;
  std::optional<TrackId> matched_track_id;
  double mean_residual_px = 0.0;  // mean refined RMS of the members, 0 when unknown

  std::size_t size() const { return member_point_ids.size(); }
};

struct ClusterConfig {
  double delta1 = 0.5;  // LPC linking distance, meters
  double delta2 = 0.7;  // GPC linking distance, meters
  int theta = 100;      // minimum GPC cluster size

  void validate() const;
};

struct IdPoint {
  PointId id = 0;
  Point3 position = Point3::Zero();
};

/// Single-linkage components of the eps-graph (edge iff distance <= eps).
/// Each component lists ids ascending; components are ordered by their smallest id.
std::vector<std::vector<PointId>> connected_components(std::span<const IdPoint> points, double eps);

/// Largest delta1-component among points that project into the box.
ObjectCluster lpc(std::span<const WorldPoint> world_points, const CameraFrame& frame,
                  const TrackedBox2D& box, const ClusterConfig& cfg);

/// delta2-components of the union with at least theta members.
std::vector<ObjectCluster> gpc(std::span<const IdPoint> union_points, const ClusterConfig& cfg);

/// Assigns each cluster to the track whose boxes contain most of its
/// reprojected points; a track keeps at most one cluster.
std::vector<ObjectCluster> match_clusters(std::vector<ObjectCluster> clusters,
                                          std::span<const TrackedBox2D> boxes,
                                          const FrameIndex& frames);

/// Local clustering per (track, frame) box, global clustering of the union,
/// then track matching. Tracks with no cluster are absent from the map.
std::map<TrackId, ObjectCluster> double_cluster(std::span<const WorldPoint> world_points,
                                                const FrameIndex& frames,
                                                std::span<const TrackedBox2D> boxes,
                                                const ClusterConfig& cfg);

}  // namespace gba
