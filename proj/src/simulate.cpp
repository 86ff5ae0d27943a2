#include "gba/simulate.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <limits>
#include <set>

#include "gba/error.hpp"

namespace gba {
namespace {

struct PathPoint {
  Eigen::Vector2d position;
  double heading = 0.0;
};

// Constant-curvature arc starting at the origin heading along +x.
PathPoint path_at(double s, double curvature) {
  if (std::abs(curvature) < 1e-12) return {{s, 0.0}, 0.0};
  const double h = curvature * s;
  return {{std::sin(h) / curvature, (1.0 - std::cos(h)) / curvature}, h};
}

struct SurfaceSample {
  Eigen::Vector3d local;   // relative to the box center, in the box frame
  Eigen::Vector3d normal;  // outward, in the box frame
};

Eigen::Matrix3d yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

// Segment a->b (excluding a tiny neighbourhood of b) against a box.
bool segment_hits_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const OrientedBox3D& box) {
  const Eigen::Matrix3d rt = yaw_rotation(box.yaw).transpose();
  const Eigen::Vector3d la = rt * (a - box.center);
  const Eigen::Vector3d d = rt * (b - box.center) - la;
  const Eigen::Vector3d half(0.5 * box.length, 0.5 * box.width, 0.5 * box.height);
  double t0 = 0.0;
  double t1 = 1.0 - 1e-6;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (la[i] < -half[i] || la[i] > half[i]) return false;
      continue;
    }
    double ta = (-half[i] - la[i]) / d[i];
    double tb = (half[i] - la[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

double uniform(std::mt19937_64& rng, std::pair<double, double> range) {
  if (range.second <= range.first) return range.first;
  return std::uniform_real_distribution<double>(range.first, range.second)(rng);
}

void require_range(std::pair<double, double> r, const char* what) {
  if (!(r.first <= r.second)) throw Error(ErrorCode::ConfigError, std::string(what) + " range must be ordered");
}

}  // namespace

OrientedBox3D TruthObject::box_at(FrameId frame) const {
  OrientedBox3D b = box;
  b.center += velocity * static_cast<double>(frame);
  return b;
}

const TruthObject* SceneTruth::object(TrackId id) const {
  auto it = std::lower_bound(objects.begin(), objects.end(), id,
                             [](const TruthObject& o, TrackId t) { return o.track_id < t; });
  return it != objects.end() && it->track_id == id ? &*it : nullptr;
}

void SceneBundle::validate() const {
  std::set<FrameId> frame_ids;
  for (const auto& f : frames) {
    if (!frame_ids.insert(f.frame_id).second) {
      throw Error(ErrorCode::InvalidInput, "duplicate frame id " + std::to_string(f.frame_id));
    }
    f.intrinsics.validate();
    if (!f.pose.is_valid(1e-9)) {
      throw Error(ErrorCode::InvalidInput, "invalid pose in frame " + std::to_string(f.frame_id));
    }
  }
  std::set<std::pair<TrackId, FrameId>> box_keys;
  for (const auto& b : boxes) {
    if (!frame_ids.count(b.frame_id)) throw Error(ErrorCode::InvalidInput, "box refers to unknown frame");
    if (!b.box.is_valid()) throw Error(ErrorCode::InvalidInput, "box with empty extent");
    if (!box_keys.emplace(b.track_id, b.frame_id).second) {
      throw Error(ErrorCode::InvalidInput, "duplicate (track, frame) box");
    }
  }
  std::set<PointId> point_ids;
  for (const auto& t : tracks) {
    if (!point_ids.insert(t.point_id).second) throw Error(ErrorCode::InvalidInput, "duplicate point id");
    if (t.observations.empty()) throw Error(ErrorCode::InvalidInput, "track without observations");
    std::set<FrameId> seen;
    for (const auto& o : t.observations) {
      if (!frame_ids.count(o.frame_id)) {
        throw Error(ErrorCode::InvalidInput, "observation refers to unknown frame");
      }
      if (!seen.insert(o.frame_id).second) {
        throw Error(ErrorCode::InvalidInput, "track observes one frame twice");
      }
    }
  }
  if (truth) {
    std::set<PointId> attributed;
    for (const auto& p : truth->points) attributed.insert(p.point_id);
    for (PointId id : point_ids) {
      if (!attributed.count(id)) throw Error(ErrorCode::InvalidInput, "truth misses point attribution");
    }
  }
}

void SimConfig::validate() const {
  if (n_objects < 1 || n_frames < 1) throw Error(ErrorCode::ConfigError, "counts must be >= 1");
  if (!(pixel_noise >= 0.0)) throw Error(ErrorCode::ConfigError, "pixel noise must be >= 0");
  if (!(moving_fraction >= 0.0 && moving_fraction <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "moving_fraction must be in [0, 1]");
  }
  if (!(camera_speed >= 0.0) || !(surface_density > 0.0) || !(focal_px > 0.0) ||
      image_width < 1 || image_height < 1 || !(max_view_distance > 0.0) ||
      !(min_separation >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "invalid simulator parameter");
  }
  require_range(length_range, "length");
  require_range(width_range, "width");
  require_range(height_range, "height");
  require_range(lateral_range, "lateral");
  require_range(moving_speed_range, "moving speed");
  if (!(width_range.first > 0.0) || !(height_range.first > 0.0) || !(lateral_range.first >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "object sizes must be positive");
  }
}

SceneBundle simulate(const SimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SceneBundle scene;

  CameraIntrinsics k{cfg.focal_px, cfg.focal_px, 0.5 * cfg.image_width, 0.5 * cfg.image_height,
                     cfg.image_width, cfg.image_height};
  for (int f = 0; f < cfg.n_frames; ++f) {
    const PathPoint pp = path_at(cfg.camera_speed * f, cfg.path_curvature);
    const Point3 center(pp.position.x(), pp.position.y(), cfg.camera_height);
    const Eigen::Vector3d forward(std::cos(pp.heading), std::sin(pp.heading), 0.0);
    scene.frames.push_back({f, k, Pose::look_along(center, forward, Eigen::Vector3d::UnitZ())});
  }

  // Object placement with rejection sampling on BEV circumcircles.
  const double s_max = cfg.camera_speed * (cfg.n_frames - 1) + cfg.ahead_margin;
  std::vector<TruthObject> objects;
  std::normal_distribution<double> yaw_jitter(0.0, 10.0 * std::numbers::pi / 180.0);
  for (int i = 0; i < cfg.n_objects; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      TruthObject obj;
      obj.track_id = i;
      OrientedBox3D& b = obj.box;
      b.length = uniform(rng, cfg.length_range);
      b.width = std::min(uniform(rng, cfg.width_range), b.length);
      b.height = uniform(rng, cfg.height_range);
      const double s = uniform(rng, {0.0, s_max});
      const double lateral = uniform(rng, cfg.lateral_range) *
                             (std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0);
      const PathPoint pp = path_at(s, cfg.path_curvature);
      const Eigen::Vector2d normal(-std::sin(pp.heading), std::cos(pp.heading));
      const Eigen::Vector2d c = pp.position + lateral * normal;
      const double flip = std::bernoulli_distribution(0.5)(rng) ? std::numbers::pi : 0.0;
      b.yaw = wrap_full_turn(pp.heading + yaw_jitter(rng) + flip);
      b.center = Point3(c.x(), c.y(), 0.5 * b.height);
      b.track_id = i;
      b.score = 1.0;

      const double radius = 0.5 * std::hypot(b.length, b.width);
      bool ok = true;
      for (const auto& other : objects) {
        const double r2 = 0.5 * std::hypot(other.box.length, other.box.width);
        const double gap = (c - other.box.center.head<2>()).norm() - radius - r2;
        if (gap < cfg.min_separation) {
          ok = false;
          break;
        }
      }
      for (const auto& frame : scene.frames) {
        if (!ok) break;
        if ((frame.pose.camera_center().head<2>() - c).norm() < radius + 1.0) ok = false;
      }
      if (ok) {
        objects.push_back(obj);
        placed = true;
      }
    }
    if (!placed) throw Error(ErrorCode::ConfigError, "cannot place all objects; enlarge the scene");
  }

  const int n_moving = static_cast<int>(std::lround(cfg.moving_fraction * cfg.n_objects));
  std::vector<int> order(objects.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int m = 0; m < n_moving; ++m) {
    TruthObject& obj = objects[order[m]];
    const double speed = uniform(rng, cfg.moving_speed_range);
    const double dir = uniform(rng, {0.0, 2.0 * std::numbers::pi});
    obj.moving = true;
    obj.velocity = Eigen::Vector3d(speed * std::cos(dir), speed * std::sin(dir), 0.0);
  }

  // Surface samples on the four sides and the roof.
  SceneTruth truth;
  std::vector<std::vector<SurfaceSample>> samples(objects.size());
  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    const OrientedBox3D& b = objects[oi].box;
    const double hl = 0.5 * b.length;
    const double hw = 0.5 * b.width;
    const double hh = 0.5 * b.height;
    struct Face {
      Eigen::Vector3d normal, origin, axis_a, axis_b;
    };
    const Face faces[] = {
        {{0, 0, 1}, {-hl, -hw, hh}, {2 * hl, 0, 0}, {0, 2 * hw, 0}},
        {{1, 0, 0}, {hl, -hw, -hh}, {0, 2 * hw, 0}, {0, 0, 2 * hh}},
        {{-1, 0, 0}, {-hl, -hw, -hh}, {0, 2 * hw, 0}, {0, 0, 2 * hh}},
        {{0, 1, 0}, {-hl, hw, -hh}, {2 * hl, 0, 0}, {0, 0, 2 * hh}},
        {{0, -1, 0}, {-hl, -hw, -hh}, {2 * hl, 0, 0}, {0, 0, 2 * hh}},
    };
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const Face& face : faces) {
      const double area = face.axis_a.norm() * face.axis_b.norm();
      const long n = std::lround(cfg.surface_density * area);
      for (long s = 0; s < n; ++s) {
        const double a = unit(rng);
        const double c = unit(rng);
        samples[oi].push_back({face.origin + a * face.axis_a + c * face.axis_b, face.normal});
      }
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  PointId next_id = 0;
  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    const TruthObject& obj = objects[oi];
    const Eigen::Matrix3d rot = yaw_rotation(obj.box.yaw);
    for (const SurfaceSample& sample : samples[oi]) {
      ObservationTrack track;
      track.point_id = next_id;
      const Point3 p0 = obj.box.center + rot * sample.local;
      const Eigen::Vector3d normal = rot * sample.normal;
      for (const auto& frame : scene.frames) {
        const Eigen::Vector3d shift = obj.velocity * static_cast<double>(frame.frame_id);
        const Point3 p = p0 + shift;
        const Point3 cam = frame.pose.camera_center();
        if (normal.dot(cam - p) <= 0.0) continue;
        if ((cam - p).norm() > cfg.max_view_distance) continue;
        if (camera_depth(frame.pose, p) < 0.5) continue;
        const Pixel2 px = project(frame.pose, p, frame.intrinsics);
        if (px.u < 0.0 || px.u >= cfg.image_width || px.v < 0.0 || px.v >= cfg.image_height) continue;
        bool occluded = false;
        if (cfg.occlusion) {
          for (std::size_t oj = 0; oj < objects.size() && !occluded; ++oj) {
            if (oj == oi) continue;
            occluded = segment_hits_box(cam, p, objects[oj].box_at(frame.frame_id));
          }
        }
        if (occluded) continue;
        Pixel2 observed = px;
        if (cfg.pixel_noise > 0.0) {
          observed.u += cfg.pixel_noise * noise(rng);
          observed.v += cfg.pixel_noise * noise(rng);
        }
        track.observations.push_back({frame.frame_id, observed});
      }
      if (track.observations.size() < 2) continue;
      truth.points.push_back({next_id, obj.track_id, p0});
      scene.tracks.push_back(std::move(track));
      ++next_id;
    }
  }

  // Exact 2D boxes: projected corners, clipped to the image.
  for (const auto& obj : objects) {
    for (const auto& frame : scene.frames) {
      const OrientedBox3D b = obj.box_at(frame.frame_id);
      if ((b.center - frame.pose.camera_center()).norm() > cfg.max_view_distance) continue;
      Box2D box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
      bool in_front = true;
      for (const Point3& corner : b.corners()) {
        if (camera_depth(frame.pose, corner) < 0.1) {
          in_front = false;
          break;
        }
        const Pixel2 px = project(frame.pose, corner, frame.intrinsics);
        box.u_min = std::min(box.u_min, px.u);
        box.v_min = std::min(box.v_min, px.v);
        box.u_max = std::max(box.u_max, px.u);
        box.v_max = std::max(box.v_max, px.v);
      }
      if (!in_front) continue;
      box.u_min = std::max(box.u_min, 0.0);
      box.v_min = std::max(box.v_min, 0.0);
      box.u_max = std::min(box.u_max, static_cast<double>(cfg.image_width));
      box.v_max = std::min(box.v_max, static_cast<double>(cfg.image_height));
      if (box.u_max - box.u_min < 2.0 || box.v_max - box.v_min < 2.0) continue;
      scene.boxes.push_back({obj.track_id, frame.frame_id, box, obj.box.class_label});
    }
  }

  truth.objects = std::move(objects);
  scene.truth = std::move(truth);
  return scene;
}

std::vector<std::pair<TrackId, FrameId>> anchor_frames(std::span<const TrackedBox2D> boxes) {
  std::map<TrackId, std::pair<double, FrameId>> best;
  for (const auto& b : boxes) {
    const double area = b.box.area();
    auto [it, inserted] = best.emplace(b.track_id, std::pair{area, b.frame_id});
    if (inserted) continue;
    auto& [best_area, best_frame] = it->second;
    if (area > best_area || (area == best_area && b.frame_id < best_frame)) {
      best_area = area;
      best_frame = b.frame_id;
    }
  }
  std::vector<std::pair<TrackId, FrameId>> out;
  for (const auto& [track, v] : best) out.emplace_back(track, v.second);
  return out;
}

}  // namespace gba
