#include "gba/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "gba/error.hpp"
#include "gba/parallel.hpp"

namespace gba {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

struct Cell {
  std::int64_t x, y, z;
  bool operator==(const Cell&) const = default;
};

struct CellHash {
  std::size_t operator()(const Cell& c) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(c.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(c.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(c.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

ObjectCluster make_cluster(std::vector<PointId> ids,
                           const std::unordered_map<PointId, const Point3*>& positions,
                           ClusterSource source) {
  std::sort(ids.begin(), ids.end());
  ObjectCluster c;
  c.source = source;
  c.points.reserve(ids.size());
  for (PointId id : ids) c.points.push_back(*positions.at(id));
  c.member_point_ids = std::move(ids);
  return c;
}

}  // namespace

void ClusterConfig::validate() const {
  if (!(delta1 > 0.0) || !(delta2 > 0.0)) {
    throw Error(ErrorCode::ConfigError, "cluster distance thresholds must be positive");
  }
  if (theta < 1) throw Error(ErrorCode::ConfigError, "theta must be >= 1");
}

std::vector<std::vector<PointId>> connected_components(std::span<const IdPoint> points,
                                                       double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::ConfigError, "eps must be positive");
  const std::size_t n = points.size();
  if (n == 0) return {};

  // Cells slightly wider than eps so that any pair within eps sits in adjacent cells.
  const double cell = eps * (1.0 + 1e-9);
  auto cell_of = [cell](const Point3& p) {
    return Cell{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                static_cast<std::int64_t>(std::floor(p.y() / cell)),
                static_cast<std::int64_t>(std::floor(p.z() / cell))};
  };
  std::unordered_map<Cell, std::vector<std::size_t>, CellHash> grid;
  grid.reserve(n);
  for (std::size_t i = 0; i < n; ++i) grid[cell_of(points[i].position)].push_back(i);

  const double eps2 = eps * eps;
  DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Cell c = cell_of(points[i].position);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find(Cell{c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= i) continue;
            if ((points[i].position - points[j].position).squaredNorm() <= eps2) sets.unite(i, j);
          }
        }
      }
    }
  }

  std::unordered_map<std::size_t, std::size_t> slot_of_root;
  std::vector<std::vector<PointId>> components;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = sets.find(i);
    auto [it, inserted] = slot_of_root.emplace(root, components.size());
    if (inserted) components.emplace_back();
    components[it->second].push_back(points[i].id);
  }
  for (auto& comp : components) std::sort(comp.begin(), comp.end());
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return components;
}

ObjectCluster lpc(std::span<const WorldPoint> world_points, const CameraFrame& frame,
                  const TrackedBox2D& box, const ClusterConfig& cfg) {
  std::vector<IdPoint> inside;
  std::unordered_map<PointId, const Point3*> positions;
  for (const auto& wp : world_points) {
    auto px = try_project(frame.pose, wp.position, frame.intrinsics);
    if (!px || !pixel_in_box(*px, box.box)) continue;
    inside.push_back({wp.point_id, wp.position});
    positions.emplace(wp.point_id, &wp.position);
  }
  ObjectCluster out;
  out.source = ClusterSource::LPC;
  if (inside.empty()) return out;

  const auto components = connected_components(inside, cfg.delta1);
  auto mean_depth = [&](const std::vector<PointId>& ids) {
    double sum = 0.0;
    for (PointId id : ids) sum += camera_depth(frame.pose, *positions.at(id));
    return sum / static_cast<double>(ids.size());
  };

  // Largest component; ties go to the nearer one, then the smallest id.
  std::size_t best = 0;
  double best_depth = mean_depth(components[0]);
  for (std::size_t i = 1; i < components.size(); ++i) {
    const auto& cand = components[i];
    const auto& cur = components[best];
    if (cand.size() < cur.size()) continue;
    const double d = mean_depth(cand);
    const bool better = cand.size() > cur.size() || d < best_depth ||
                        (d == best_depth && cand.front() < cur.front());
    if (better) {
      best = i;
      best_depth = d;
    }
  }
  return make_cluster(components[best], positions, ClusterSource::LPC);
}

std::vector<ObjectCluster> gpc(std::span<const IdPoint> union_points, const ClusterConfig& cfg) {
  std::unordered_map<PointId, const Point3*> positions;
  positions.reserve(union_points.size());
  for (const auto& p : union_points) positions.emplace(p.id, &p.position);

  std::vector<ObjectCluster> clusters;
  for (auto& comp : connected_components(union_points, cfg.delta2)) {
    if (static_cast<int>(comp.size()) < cfg.theta) continue;
    clusters.push_back(make_cluster(std::move(comp), positions, ClusterSource::GPC));
  }
  return clusters;
}

std::vector<ObjectCluster> match_clusters(std::vector<ObjectCluster> clusters,
                                          std::span<const TrackedBox2D> boxes,
                                          const FrameIndex& frames) {
  std::map<FrameId, std::vector<const TrackedBox2D*>> boxes_by_frame;
  for (const auto& b : boxes) boxes_by_frame[b.frame_id].push_back(&b);

  struct Claim {
    TrackId track = 0;
    long count = 0;
  };
  std::vector<std::optional<Claim>> claims(clusters.size());
  parallel_for(clusters.size(), [&](std::size_t ci) {
    std::map<TrackId, long> counts;
    for (const auto& [frame_id, frame_boxes] : boxes_by_frame) {
      const CameraFrame* frame = frames.find(frame_id);
      if (frame == nullptr) continue;
      for (const Point3& p : clusters[ci].points) {
        auto px = try_project(frame->pose, p, frame->intrinsics);
        if (!px) continue;
        for (const TrackedBox2D* b : frame_boxes) {
          if (pixel_in_box(*px, b->box)) ++counts[b->track_id];
        }
      }
    }
    // std::map iterates by ascending track id, so equal counts keep the smaller id.
    for (const auto& [track, count] : counts) {
      if (count > 0 && (!claims[ci] || count > claims[ci]->count)) claims[ci] = Claim{track, count};
    }
  });

  std::map<TrackId, std::size_t> winner;
  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    clusters[ci].matched_track_id.reset();
    if (!claims[ci]) continue;
    auto [it, inserted] = winner.emplace(claims[ci]->track, ci);
    if (!inserted && claims[ci]->count > claims[it->second]->count) it->second = ci;
  }
  for (const auto& [track, ci] : winner) clusters[ci].matched_track_id = track;
  return clusters;
}

std::map<TrackId, ObjectCluster> double_cluster(std::span<const WorldPoint> world_points,
                                                const FrameIndex& frames,
                                                std::span<const TrackedBox2D> boxes,
                                                const ClusterConfig& cfg) {
  cfg.validate();
  std::vector<ObjectCluster> local(boxes.size());
  parallel_for(boxes.size(), [&](std::size_t i) {
    const CameraFrame* frame = frames.find(boxes[i].frame_id);
    if (frame != nullptr) local[i] = lpc(world_points, *frame, boxes[i], cfg);
  });

  std::map<PointId, Point3> merged;
  for (const auto& c : local) {
    for (std::size_t k = 0; k < c.size(); ++k) merged.emplace(c.member_point_ids[k], c.points[k]);
  }
  std::vector<IdPoint> union_points;
  union_points.reserve(merged.size());
  for (const auto& [id, p] : merged) union_points.push_back({id, p});

  std::unordered_map<PointId, double> residual;
  for (const auto& wp : world_points) residual.emplace(wp.point_id, wp.residual_rms);

  std::map<TrackId, ObjectCluster> out;
  for (auto& c : match_clusters(gpc(union_points, cfg), boxes, frames)) {
    if (!c.matched_track_id) continue;
    double sum = 0.0;
    for (PointId id : c.member_point_ids) sum += residual.at(id);
    c.mean_residual_px = sum / static_cast<double>(c.size());
    const TrackId track = *c.matched_track_id;
    out.emplace(track, std::move(c));
  }
  return out;
}

}  // namespace gba
