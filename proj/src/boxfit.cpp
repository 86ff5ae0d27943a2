#include "gba/boxfit.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "gba/error.hpp"

namespace gba {
namespace {

using Vec2 = Eigen::Vector2d;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew's monotone chain, counter-clockwise, no collinear vertices.
std::vector<Vec2> convex_hull(std::span<const Vec2> input) {
  std::vector<Vec2> pts(input.begin(), input.end());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

void require_area(std::span<const Vec2> points) {
  if (points.size() < 3) throw Error(ErrorCode::DegenerateCluster, "need at least 3 BEV points");
  const auto hull = convex_hull(points);
  double area = 0.0;
  double extent = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    area += a.x() * b.y() - b.x() * a.y();
    extent = std::max(extent, (a - hull[0]).norm());
  }
  if (hull.size() < 3 || std::abs(0.5 * area) <= 1e-12 * std::max(extent * extent, 1e-300)) {
    throw Error(ErrorCode::DegenerateCluster, "BEV points are collinear");
  }
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

}  // namespace

double wrap_half_turn(double angle) {
  double r = std::fmod(angle, std::numbers::pi);
  if (r < 0.0) r += std::numbers::pi;
  if (r >= std::numbers::pi) r = 0.0;
  return r;
}

double wrap_full_turn(double angle) {
  double r = std::fmod(angle + std::numbers::pi, 2.0 * std::numbers::pi);
  if (r < 0.0) r += 2.0 * std::numbers::pi;
  r -= std::numbers::pi;
  if (r >= std::numbers::pi) r = -std::numbers::pi;
  return r;
}

std::array<Eigen::Vector2d, 4> OrientedBox3D::bev_corners() const {
  const Vec2 c(center.x(), center.y());
  const Vec2 u(std::cos(yaw), std::sin(yaw));
  const Vec2 v(-u.y(), u.x());
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  return {c - hl * u - hw * v, c + hl * u - hw * v, c + hl * u + hw * v, c - hl * u + hw * v};
}

std::array<Point3, 8> OrientedBox3D::corners() const {
  const auto bev = bev_corners();
  std::array<Point3, 8> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = Point3(bev[i].x(), bev[i].y(), z_min());
    out[i + 4] = Point3(bev[i].x(), bev[i].y(), z_max());
  }
  return out;
}

bool OrientedBox3D::contains(const Point3& p) const {
  const Vec2 d(p.x() - center.x(), p.y() - center.y());
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double along = c * d.x() + s * d.y();
  const double across = -s * d.x() + c * d.y();
  return std::abs(along) <= 0.5 * length && std::abs(across) <= 0.5 * width &&
         p.z() >= z_min() && p.z() <= z_max();
}

Eigen::Vector2d BevRectangle::center() const {
  const Vec2 u(std::cos(yaw), std::sin(yaw));
  const Vec2 v(-u.y(), u.x());
  return 0.5 * (u_min + u_max) * u + 0.5 * (v_min + v_max) * v;
}

std::array<Eigen::Vector2d, 4> BevRectangle::corners() const {
  const Vec2 u(std::cos(yaw), std::sin(yaw));
  const Vec2 v(-u.y(), u.x());
  return {u_min * u + v_min * v, u_max * u + v_min * v, u_max * u + v_max * v,
          u_min * u + v_max * v};
}

void FitConfig::validate() const {
  if (!(coarse_step > 0.0) || coarse_step > std::numbers::pi / 36.0) {
    throw Error(ErrorCode::ConfigError, "coarse_step must be in (0, pi/36]");
  }
  if (!(refine_tolerance > 0.0)) throw Error(ErrorCode::ConfigError, "refine_tolerance must be > 0");
  if (!(sigma0 > 0.0) || !(sigma0 < sigma1)) {
    throw Error(ErrorCode::ConfigError, "need 0 < sigma0 < sigma1");
  }
  const auto [lo, hi] = cutoff_fraction_range;
  if (!(lo >= 0.0) || !(lo <= hi) || !(hi <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "cutoff_fraction_range must satisfy 0 <= min <= max <= 1");
  }
}

BevRectangle tight_rectangle(std::span<const Eigen::Vector2d> points, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  BevRectangle r{yaw, std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity(),
                 std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity()};
  for (const auto& p : points) {
    const double u = c * p.x() + s * p.y();
    const double v = -s * p.x() + c * p.y();
    r.u_min = std::min(r.u_min, u);
    r.u_max = std::max(r.u_max, u);
    r.v_min = std::min(r.v_min, v);
    r.v_max = std::max(r.v_max, v);
  }
  return r;
}

BevRectangle fit_min_area_rect(std::span<const Eigen::Vector2d> points) {
  require_area(points);
  const auto hull = convex_hull(points);
  // The optimal rectangle has one side collinear with a hull edge.
  BevRectangle best;
  double best_area = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 edge = hull[(i + 1) % hull.size()] - hull[i];
    const double yaw = wrap_half_turn(std::atan2(edge.y(), edge.x()));
    const BevRectangle r = tight_rectangle(hull, yaw);
    if (r.area() < best_area) {
      best_area = r.area();
      best = r;
    }
  }
  return best;
}

double edge_distance_cost(std::span<const Eigen::Vector2d> points, double yaw) {
  const auto corners = tight_rectangle(points, yaw).corners();
  double total = 0.0;
  for (const auto& p : points) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int e = 0; e < 4; ++e) {
      nearest = std::min(nearest, segment_distance(p, corners[e], corners[(e + 1) % 4]));
    }
    total += nearest;
  }
  return total;
}

BevRectangle fit_orientation_edge(std::span<const Eigen::Vector2d> points, const FitConfig& cfg) {
  require_area(points);
  const std::size_t n_grid =
      static_cast<std::size_t>(std::ceil(std::numbers::pi / cfg.coarse_step - 1e-9));
  const double step = std::numbers::pi / static_cast<double>(n_grid);
  std::vector<double> grid_cost(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) {
    grid_cost[i] = edge_distance_cost(points, static_cast<double>(i) * step);
  }

  // Refine around the deepest few local minima of the (circular) grid.
  std::vector<std::size_t> minima;
  for (std::size_t i = 0; i < n_grid; ++i) {
    const double prev = grid_cost[(i + n_grid - 1) % n_grid];
    const double next = grid_cost[(i + 1) % n_grid];
    if (grid_cost[i] <= prev && grid_cost[i] <= next) minima.push_back(i);
  }
  std::sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) {
    return grid_cost[a] < grid_cost[b] || (grid_cost[a] == grid_cost[b] && a < b);
  });
  constexpr std::size_t kRefinedMinima = 4;
  if (minima.size() > kRefinedMinima) minima.resize(kRefinedMinima);

  double best_yaw = static_cast<double>(minima.front()) * step;
  double best_cost = grid_cost[minima.front()];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (std::size_t m : minima) {
    double lo = (static_cast<double>(m) - 1.0) * step;
    double hi = (static_cast<double>(m) + 1.0) * step;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = edge_distance_cost(points, x1);
    double f2 = edge_distance_cost(points, x2);
    while (hi - lo > cfg.refine_tolerance) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = edge_distance_cost(points, x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = edge_distance_cost(points, x2);
      }
    }
    for (const auto& [x, f] : {std::pair{x1, f1}, std::pair{x2, f2}}) {
      if (f < best_cost) {
        best_cost = f;
        best_yaw = x;
      }
    }
  }
  // Hull-edge orientations are exact for sharp rectangles and include the
  // min-area baseline, so the result never scores worse than it.
  const auto hull = convex_hull(points);
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 edge = hull[(i + 1) % hull.size()] - hull[i];
    const double yaw = wrap_half_turn(std::atan2(edge.y(), edge.x()));
    const double f = edge_distance_cost(points, yaw);
    if (f < best_cost) {
      best_cost = f;
      best_yaw = yaw;
    }
  }
  return tight_rectangle(points, wrap_half_turn(best_yaw));
}

double pseudo_label_score(std::size_t n_points, double mean_residual_px, int theta) {
  const double coverage = std::min(1.0, static_cast<double>(n_points) / std::max(theta, 1));
  return coverage * std::exp(-std::max(mean_residual_px, 0.0) / 3.0);
}

OrientedBox3D fit_box7(const ObjectCluster& cluster, const FitConfig& cfg, int theta) {
  std::vector<Vec2> bev;
  bev.reserve(cluster.points.size());
  double z_lo = std::numeric_limits<double>::infinity();
  double z_hi = -std::numeric_limits<double>::infinity();
  for (const auto& p : cluster.points) {
    bev.emplace_back(p.x(), p.y());
    z_lo = std::min(z_lo, p.z());
    z_hi = std::max(z_hi, p.z());
  }
  const BevRectangle rect = fit_orientation_edge(bev, cfg);
  if (!(z_hi > z_lo)) throw Error(ErrorCode::DegenerateCluster, "cluster has no vertical extent");

  const double along_u = rect.u_max - rect.u_min;
  const double along_v = rect.v_max - rect.v_min;
  const Vec2 c = rect.center();

  OrientedBox3D box;
  box.center = Point3(c.x(), c.y(), 0.5 * (z_hi + z_lo));
  box.height = z_hi - z_lo;
  if (along_u >= along_v) {
    box.length = along_u;
    box.width = along_v;
    box.yaw = wrap_half_turn(rect.yaw);
  } else {
    box.length = along_v;
    box.width = along_u;
    box.yaw = wrap_half_turn(rect.yaw + 0.5 * std::numbers::pi);
  }
  box.score = pseudo_label_score(cluster.size(), cluster.mean_residual_px, theta);
  box.track_id = cluster.matched_track_id;
  box.has_3d = true;
  return box;
}

bool completeness_filter(const OrientedBox3D& box, const FitConfig& cfg) {
  return box.length >= cfg.sigma0 && box.length <= cfg.sigma1;
}

CutoffResult cutoff_augment(const ObjectCluster& cluster, std::uint64_t seed,
                            const FitConfig& cfg) {
  const std::size_t n = cluster.size();
  if (n == 0) throw Error(ErrorCode::InvalidInput, "cutoff_augment needs a non-empty cluster");
  const auto [lo, hi] = cfg.cutoff_fraction_range;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> fraction_dist(lo, hi);
  std::uniform_real_distribution<double> angle_dist(0.0, 2.0 * std::numbers::pi);

  constexpr int kMaxDraws = 16;
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    const double fraction = hi > lo ? fraction_dist(rng) : lo;
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (k == 0) return {cluster, 0, false};
    const double phi = angle_dist(rng);
    if (k >= n) continue;

    // The k points furthest along the plane normal are cut.
    const Vec2 normal(std::cos(phi), std::sin(phi));
    std::vector<double> offset(n);
    for (std::size_t i = 0; i < n; ++i) {
      offset[i] = normal.x() * cluster.points[i].x() + normal.y() * cluster.points[i].y();
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return offset[a] > offset[b]; });
    if (!(offset[order[k - 1]] > offset[order[k]])) continue;  // plane cannot split ties

    std::vector<bool> cut(n, false);
    for (std::size_t i = 0; i < k; ++i) cut[order[i]] = true;
    CutoffResult out;
    out.cluster = cluster;
    out.cluster.member_point_ids.clear();
    out.cluster.points.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (cut[i]) continue;
      out.cluster.member_point_ids.push_back(cluster.member_point_ids[i]);
      out.cluster.points.push_back(cluster.points[i]);
    }
    out.removed = k;
    return out;
  }
  return {cluster, 0, true};
}

}  // namespace gba
