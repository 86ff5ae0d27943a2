#include "gba/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "gba/error.hpp"

namespace gba {
namespace {

using Vec2 = Eigen::Vector2d;

constexpr double kAreaEpsilon = 1e-12;

double polygon_area(const std::vector<Vec2>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

void require_valid(const OrientedBox3D& box) {
  if (!(box.width > 0.0) || !(box.height > 0.0) || !(box.length > 0.0) ||
      !box.center.allFinite() || !std::isfinite(box.yaw)) {
    throw Error(ErrorCode::InvalidBox, "box sizes must be positive and finite");
  }
}

std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

std::string DepthBucket::name() const {
  if (std::isinf(max_m)) return fmt::format("{:g}-inf", min_m);
  return fmt::format("{:g}-{:g}", min_m, max_m);
}

void EvalConfig::validate() const {
  for (double t : iou_thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorCode::ConfigError, "IoU thresholds must lie in (0, 1]");
  }
  for (double t : let_thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorCode::ConfigError, "LET thresholds must lie in (0, 1]");
  }
  if (!(let_longitudinal_tolerance > 0.0)) {
    throw Error(ErrorCode::ConfigError, "LET tolerance must be positive");
  }
  for (std::size_t i = 0; i < depth_buckets.size(); ++i) {
    if (!(depth_buckets[i].min_m < depth_buckets[i].max_m)) {
      throw Error(ErrorCode::ConfigError, "depth bucket must have min < max");
    }
    if (i > 0 && depth_buckets[i].min_m < depth_buckets[i - 1].max_m) {
      throw Error(ErrorCode::ConfigError, "depth buckets must be disjoint and ordered");
    }
  }
}

double convex_intersection_area(std::span<const Eigen::Vector2d> a,
                                std::span<const Eigen::Vector2d> b) {
  // Sutherland-Hodgman: clip `a` against each edge of `b`.
  std::vector<Vec2> poly(a.begin(), a.end());
  for (std::size_t e = 0; e < b.size() && !poly.empty(); ++e) {
    const Vec2& p0 = b[e];
    const Vec2& p1 = b[(e + 1) % b.size()];
    const Vec2 edge = p1 - p0;
    auto side = [&](const Vec2& q) { return edge.x() * (q.y() - p0.y()) - edge.y() * (q.x() - p0.x()); };
    std::vector<Vec2> clipped;
    clipped.reserve(poly.size() + 1);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& cur = poly[i];
      const Vec2& nxt = poly[(i + 1) % poly.size()];
      const double sc = side(cur);
      const double sn = side(nxt);
      if (sc >= 0.0) clipped.push_back(cur);
      if ((sc >= 0.0) != (sn >= 0.0)) {
        const double t = sc / (sc - sn);
        clipped.push_back(cur + t * (nxt - cur));
      }
    }
    poly = std::move(clipped);
  }
  if (poly.size() < 3) return 0.0;
  const double area = polygon_area(poly);
  return area > kAreaEpsilon ? area : 0.0;
}

double iou3d_yaw(const OrientedBox3D& a, const OrientedBox3D& b) {
  require_valid(a);
  require_valid(b);
  const auto ca = a.bev_corners();
  const auto cb = b.bev_corners();
  const double bev = convex_intersection_area(ca, cb);
  const double dz = std::min(a.z_max(), b.z_max()) - std::max(a.z_min(), b.z_min());
  if (bev <= 0.0 || dz <= 0.0) return 0.0;
  const double inter = bev * dz;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

LetResult let_iou(const OrientedBox3D& pred, const OrientedBox3D& gt, const EvalConfig& cfg,
                  const Eigen::Vector3d& sensor) {
  require_valid(pred);
  require_valid(gt);
  const Eigen::Vector3d g = gt.center - sensor;
  const Eigen::Vector3d p = pred.center - sensor;
  const double range = g.norm();
  if (!(range > 0.0)) throw Error(ErrorCode::InvalidBox, "gt center coincides with the sensor");

  LetResult out;
  out.longitudinal_error = (p - g).dot(g / range);
  out.affinity = std::clamp(
      1.0 - std::abs(out.longitudinal_error) / (cfg.let_longitudinal_tolerance * range), 0.0, 1.0);

  // Slide the prediction along its own line of sight to the point closest to the gt center.
  OrientedBox3D aligned = pred;
  const double p2 = p.squaredNorm();
  if (p2 > 0.0) aligned.center = sensor + std::max(0.0, p.dot(g) / p2) * p;
  out.iou = std::max(iou3d_yaw(pred, gt), iou3d_yaw(aligned, gt));
  return out;
}

double heading_similarity(double pred_yaw, double gt_yaw, bool flip_tolerant) {
  double err = std::abs(wrap_full_turn(pred_yaw - gt_yaw));
  if (flip_tolerant) {
    err = std::min(err, std::abs(err - std::numbers::pi));
    return std::clamp(1.0 - err / (0.5 * std::numbers::pi), 0.0, 1.0);
  }
  return std::clamp(1.0 - err / std::numbers::pi, 0.0, 1.0);
}

std::vector<MatchResult> match_predictions(std::span<const EvalObject> preds,
                                           std::span<const EvalObject> gts,
                                           const ApOptions& opt, const EvalConfig& cfg) {
  std::vector<double> scores(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) scores[i] = preds[i].box.score;

  std::vector<bool> taken(gts.size(), false);
  std::vector<MatchResult> matches;
  for (std::size_t pi : rank_by_score(scores)) {
    const OrientedBox3D& pb = preds[pi].box;
    std::optional<std::size_t> best;
    double best_value = -1.0;
    LetResult best_let;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (taken[gi]) continue;
      double value = 0.0;
      LetResult let;
      if (opt.criterion == Criterion::LET || opt.weighting == Weighting::Longitudinal) {
        let = let_iou(pb, gts[gi].box, cfg, gts[gi].sensor);
      }
      value = opt.criterion == Criterion::LET ? let.iou : iou3d_yaw(pb, gts[gi].box);
      if (value >= opt.threshold && value > best_value) {
        best = gi;
        best_value = value;
        best_let = let;
      }
    }
    if (!best) continue;
    taken[*best] = true;
    MatchResult m;
    m.pred_index = pi;
    m.gt_index = *best;
    m.iou = best_value;
    const double gt_yaw = gts[*best].box.yaw;
    m.heading_similarity = heading_similarity(pb.yaw, gt_yaw, false);
    switch (opt.weighting) {
      case Weighting::None: m.weight = 1.0; break;
      case Weighting::Heading: m.weight = m.heading_similarity; break;
      case Weighting::HeadingFlipTolerant: m.weight = heading_similarity(pb.yaw, gt_yaw, true); break;
      case Weighting::Longitudinal: m.weight = best_let.affinity; break;
    }
    matches.push_back(m);
  }
  return matches;
}

ApResult ap_from_ranked(std::span<const double> scores, std::span<const double> tp_weight,
                        std::size_t n_gt) {
  ApResult out;
  out.n_gt = n_gt;
  out.n_pred = scores.size();
  if (n_gt == 0) {
    out.defined = false;
    out.ap = scores.empty() ? 1.0 : 0.0;
    return out;
  }
  double tp = 0.0;
  std::size_t rank = 0;
  for (std::size_t i : rank_by_score(scores)) {
    ++rank;
    tp += tp_weight[i];
    out.curve.push_back({tp / static_cast<double>(n_gt), tp / static_cast<double>(rank), scores[i]});
  }
  // Precision envelope from the right, integrated over recall increments.
  std::vector<double> envelope(out.curve.size());
  double running = 0.0;
  for (std::size_t k = out.curve.size(); k-- > 0;) {
    running = std::max(running, out.curve[k].precision);
    envelope[k] = running;
  }
  double prev_recall = 0.0;
  double ap = 0.0;
  for (std::size_t k = 0; k < out.curve.size(); ++k) {
    ap += (out.curve[k].recall - prev_recall) * envelope[k];
    prev_recall = out.curve[k].recall;
  }
  out.ap = ap;
  return out;
}

ApResult average_precision(std::span<const EvalObject> preds, std::span<const EvalObject> gts,
                           const ApOptions& opt, const EvalConfig& cfg) {
  std::vector<double> scores(preds.size());
  std::vector<double> weight(preds.size(), 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) scores[i] = preds[i].box.score;
  for (const auto& m : match_predictions(preds, gts, opt, cfg)) weight[m.pred_index] = m.weight;
  return ap_from_ranked(scores, weight, gts.size());
}

DepthMetrics depth_metrics(std::span<const std::pair<double, double>> pairs) {
  DepthMetrics m;
  m.count = pairs.size();
  if (pairs.empty()) return m;
  const double t1 = 1.25;
  const double t2 = t1 * t1;
  const double t3 = t2 * t1;
  double sq = 0.0;
  double sq_log = 0.0;
  for (const auto& [pred, gt] : pairs) {
    if (!(pred > 0.0) || !(gt > 0.0)) {
      throw Error(ErrorCode::NonPositiveDepth, "depth_metrics needs positive depths");
    }
    const double ratio = std::max(pred / gt, gt / pred);
    m.delta_1 += ratio < t1 ? 1.0 : 0.0;
    m.delta_2 += ratio < t2 ? 1.0 : 0.0;
    m.delta_3 += ratio < t3 ? 1.0 : 0.0;
    const double diff = pred - gt;
    m.abs_rel += std::abs(diff) / gt;
    m.sq_rel += diff * diff / gt;
    sq += diff * diff;
    const double dlog = std::log(pred) - std::log(gt);
    sq_log += dlog * dlog;
  }
  const double n = static_cast<double>(pairs.size());
  m.delta_1 /= n;
  m.delta_2 /= n;
  m.delta_3 /= n;
  m.abs_rel /= n;
  m.sq_rel /= n;
  m.rmse = std::sqrt(sq / n);
  m.rmse_log = std::sqrt(sq_log / n);
  return m;
}

std::vector<BucketResult> bucket_report(std::span<const EvalObject> preds,
                                        std::span<const EvalObject> gts, const ApOptions& opt,
                                        const EvalConfig& cfg) {
  const auto matches = match_predictions(preds, gts, opt, cfg);
  std::vector<std::optional<std::size_t>> matched_gt(preds.size());
  std::vector<double> weight(preds.size(), 0.0);
  for (const auto& m : matches) {
    matched_gt[m.pred_index] = m.gt_index;
    weight[m.pred_index] = m.weight;
  }

  std::vector<BucketResult> out;
  for (const auto& bucket : cfg.depth_buckets) {
    std::size_t n_gt = 0;
    for (const auto& g : gts) n_gt += bucket.contains(g.depth) ? 1 : 0;
    std::vector<double> scores;
    std::vector<double> w;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const double depth = matched_gt[i] ? gts[*matched_gt[i]].depth : preds[i].depth;
      if (!bucket.contains(depth)) continue;
      scores.push_back(preds[i].box.score);
      w.push_back(weight[i]);
    }
    out.push_back({bucket, ap_from_ranked(scores, w, n_gt)});
  }
  return out;
}

}  // namespace gba
