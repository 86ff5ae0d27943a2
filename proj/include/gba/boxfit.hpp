#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <utility>

#include "gba/box3d.hpp"
#include "gba/cluster.hpp"

namespace gba {

/// Rectangle in the BEV plane; extents are measured along the rotated axes
/// u = (cos yaw, sin yaw) and v = (-sin yaw, cos yaw).
struct BevRectangle {
  double yaw = 0.0;
  double u_min = 0.0;
  double u_max = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;

  double area() const { return (u_max - u_min) * (v_max - v_min); }
  Eigen::Vector2d center() const;
  std::array<Eigen::Vector2d, 4> corners() const;
};

struct FitConfig {
  double coarse_step = 0.25 * 3.14159265358979323846 / 180.0;
  double refine_tolerance = 0.01 * 3.14159265358979323846 / 180.0;
  double sigma0 = 3.0;
  double sigma1 = 10.0;
  std::pair<double, double> cutoff_fraction_range{0.1, 0.4};

  void validate() const;
};

/// Rotating-calipers minimum-area enclosing rectangle. Throws DegenerateCluster.
BevRectangle fit_min_area_rect(std::span<const Eigen::Vector2d> points);

/// Tight rectangle whose edges follow the rotated axes at `yaw`.
BevRectangle tight_rectangle(std::span<const Eigen::Vector2d> points, double yaw);

/// Sum over points of the distance to the nearest edge segment of the tight
/// rectangle at `yaw`.
double edge_distance_cost(std::span<const Eigen::Vector2d> points, double yaw);

/// Orientation minimizing edge_distance_cost: coarse grid over [0, pi),
/// golden-section refinement around the deepest grid minima, then the convex
/// hull edge orientations as extra candidates. Throws DegenerateCluster.
BevRectangle fit_orientation_edge(std::span<const Eigen::Vector2d> points, const FitConfig& cfg);

/// min(1, n / theta) * exp(-residual / 3 px)
double pseudo_label_score(std::size_t n_points, double mean_residual_px, int theta);

/// Full 7-DoF fit: edge-distance BEV rectangle plus z extent. Yaw follows the
/// longer side and lies in [0, pi).
OrientedBox3D fit_box7(const ObjectCluster& cluster, const FitConfig& cfg, int theta = 100);

/// sigma0 <= length <= sigma1
bool completeness_filter(const OrientedBox3D& box, const FitConfig& cfg);

struct CutoffResult {
  ObjectCluster cluster;
  std::size_t removed = 0;
  bool unchanged_fallback = false;  // every redraw would have emptied the cluster
};

/// Removes the points on one side of a seeded random vertical plane.
CutoffResult cutoff_augment(const ObjectCluster& cluster, std::uint64_t seed, const FitConfig& cfg);

}  // namespace gba
