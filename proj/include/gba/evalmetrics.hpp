#pragma once

#include <Eigen/Core>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gba/box3d.hpp"

namespace gba {

struct DepthBucket {
  double min_m = 0.0;
  double max_m = std::numeric_limits<double>::infinity();  // half-open [min, max)

  bool contains(double depth) const { return depth >= min_m && depth < max_m; }
  std::string name() const;
};

struct EvalConfig {
  std::vector<double> iou_thresholds{0.05, 0.5};
  std::vector<double> let_thresholds{0.5};
  double let_longitudinal_tolerance = 0.10;  // fraction of the gt range
  std::vector<DepthBucket> depth_buckets{{0.0, 30.0}, {30.0, 50.0}, {50.0, std::numeric_limits<double>::infinity()}};

  void validate() const;
};

/// A box with the sensor position it was observed from and its depth along
/// that sensor's viewing axis.
struct EvalObject {
  OrientedBox3D box;
  Eigen::Vector3d sensor = Eigen::Vector3d::Zero();
  double depth = 0.0;
};

/// Intersection over union of two yaw-only boxes. Throws InvalidBox.
double iou3d_yaw(const OrientedBox3D& a, const OrientedBox3D& b);

/// Area of the intersection of two convex polygons (counter-clockwise).
double convex_intersection_area(std::span<const Eigen::Vector2d> a,
                                std::span<const Eigen::Vector2d> b);

struct LetResult {
  double iou = 0.0;       // IoU after removing the longitudinal error
  double affinity = 0.0;  // 1 - |longitudinal error| / (tolerance * gt range), clamped
  double longitudinal_error = 0.0;
};

/// Longitudinal-error-tolerant IoU w.r.t. a sensor at `sensor`.
LetResult let_iou(const OrientedBox3D& pred, const OrientedBox3D& gt, const EvalConfig& cfg,
                  const Eigen::Vector3d& sensor = Eigen::Vector3d::Zero());

double heading_similarity(double pred_yaw, double gt_yaw, bool flip_tolerant);

enum class Criterion { IoU, LET };

enum class Weighting {
  None,             // AP
  Heading,          // APH
  HeadingFlipTolerant,
  Longitudinal,     // APL
};

struct ApOptions {
  Criterion criterion = Criterion::IoU;
  double threshold = 0.5;
  Weighting weighting = Weighting::None;
};

struct MatchResult {
  std::size_t pred_index = 0;
  std::size_t gt_index = 0;
  double iou = 0.0;
  double heading_similarity = 0.0;
  double weight = 1.0;  // contribution of this true positive under the weighting
};

/// Greedy matching in descending score order (ties by prediction index).
/// Returns one entry per matched prediction; unmatched predictions are false positives.
std::vector<MatchResult> match_predictions(std::span<const EvalObject> preds,
                                           std::span<const EvalObject> gts,
                                           const ApOptions& opt, const EvalConfig& cfg);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
  double score = 0.0;
};

struct ApResult {
  double ap = 0.0;
  bool defined = true;  // false when there are no ground truths (reported as n/a)
  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
  std::vector<PrPoint> curve;
};

/// All-points interpolated area under the precision envelope. `tp_weight[i]`
/// is the contribution of prediction i (0 for false positives).
ApResult ap_from_ranked(std::span<const double> scores, std::span<const double> tp_weight,
                        std::size_t n_gt);

ApResult average_precision(std::span<const EvalObject> preds, std::span<const EvalObject> gts,
                           const ApOptions& opt, const EvalConfig& cfg);

struct DepthMetrics {
  double delta_1 = 0.0;
  double delta_2 = 0.0;
  double delta_3 = 0.0;
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  std::size_t count = 0;
};

/// Pairs are (predicted depth, ground-truth depth). Throws NonPositiveDepth.
DepthMetrics depth_metrics(std::span<const std::pair<double, double>> pairs);

struct BucketResult {
  DepthBucket bucket;
  ApResult result;
};

/// Per-depth-bucket AP. Matching is done once over the whole set; a matched
/// prediction counts in its ground truth's bucket, an unmatched one in the
/// bucket of its own depth.
std::vector<BucketResult> bucket_report(std::span<const EvalObject> preds,
                                        std::span<const EvalObject> gts, const ApOptions& opt,
                                        const EvalConfig& cfg);

}  // namespace gba
