#include "gba/evaluate.hpp"

#include <fmt/format.h>

#include <map>

#include "gba/error.hpp"
#include "gba/triangulate.hpp"

namespace gba {
namespace {

using nlohmann::ordered_json;

struct MetricEntry {
  std::string name;
  ApOptions options;
};

std::vector<MetricEntry> metric_entries(const EvalConfig& cfg) {
  std::vector<MetricEntry> entries;
  for (double t : cfg.iou_thresholds) {
    entries.push_back({"AP", {Criterion::IoU, t, Weighting::None}});
    entries.push_back({"APH", {Criterion::IoU, t, Weighting::Heading}});
    entries.push_back({"APH_flip", {Criterion::IoU, t, Weighting::HeadingFlipTolerant}});
  }
  for (double t : cfg.let_thresholds) {
    entries.push_back({"LET_AP", {Criterion::LET, t, Weighting::None}});
    entries.push_back({"LET_APH", {Criterion::LET, t, Weighting::Heading}});
    entries.push_back({"LET_APL", {Criterion::LET, t, Weighting::Longitudinal}});
  }
  return entries;
}

ordered_json depth_group(std::size_t n_objects, const std::vector<std::pair<double, double>>& pairs) {
  ordered_json g;
  g["n_objects"] = n_objects;
  g["n_evaluated"] = pairs.size();
  if (pairs.empty()) {
    g["metrics"] = nullptr;
    return g;
  }
  const DepthMetrics m = depth_metrics(pairs);
  g["metrics"] = {{"delta_1", m.delta_1}, {"delta_2", m.delta_2}, {"delta_3", m.delta_3},
                  {"abs_rel", m.abs_rel}, {"sq_rel", m.sq_rel},   {"rmse", m.rmse},
                  {"rmse_log", m.rmse_log}};
  return g;
}

std::string render_text(const ordered_json& report) {
  std::string out = fmt::format("ground truth: {}   predictions: {}   pseudo-label coverage: {:.4f}\n\n",
                                report["n_gt"].get<std::size_t>(), report["n_pred"].get<std::size_t>(),
                                report["pseudo_label_coverage"].get<double>());
  out += fmt::format("{:<10} {:<6} {:>9} {:>10}\n", "metric", "crit", "threshold", "value");
  for (const auto& m : report["metrics"]) {
    const std::string value =
        m["defined"].get<bool>() ? fmt::format("{:.4f}", m["value"].get<double>()) : "n/a";
    out += fmt::format("{:<10} {:<6} {:>9.2f} {:>10}\n", m["name"].get<std::string>(),
                       m["criterion"].get<std::string>(), m["threshold"].get<double>(), value);
  }
  out += fmt::format("\n{:<10} {:>9} {:<10} {:>6} {:>10}\n", "metric", "threshold", "depth", "n_gt",
                     "value");
  for (const auto& b : report["buckets"]) {
    const std::string value =
        b["defined"].get<bool>() ? fmt::format("{:.4f}", b["value"].get<double>()) : "n/a";
    out += fmt::format("{:<10} {:>9.2f} {:<10} {:>6} {:>10}\n", b["name"].get<std::string>(),
                       b["threshold"].get<double>(), b["bucket"].get<std::string>(),
                       b["n_gt"].get<std::size_t>(), value);
  }
  out += "\nobject-level depth\n";
  for (const char* group : {"with_pseudo_label", "without_pseudo_label"}) {
    const auto& g = report["depth"][group];
    out += fmt::format("{:<22} objects {:>5}  evaluated {:>5}", group, g["n_objects"].get<std::size_t>(),
                       g["n_evaluated"].get<std::size_t>());
    if (!g["metrics"].is_null()) {
      const auto& m = g["metrics"];
      out += fmt::format("  d1 {:.4f} d2 {:.4f} d3 {:.4f} abs_rel {:.4f} sq_rel {:.4f} rmse {:.4f} rmse_log {:.4f}",
                         m["delta_1"].get<double>(), m["delta_2"].get<double>(), m["delta_3"].get<double>(),
                         m["abs_rel"].get<double>(), m["sq_rel"].get<double>(), m["rmse"].get<double>(),
                         m["rmse_log"].get<double>());
    }
    out += "\n";
  }
  return out;
}

// Latest-generation 3D label per track.
std::map<TrackId, const Label*> latest_3d(const LabelSet& labels) {
  std::map<TrackId, const Label*> out;
  for (const auto& l : labels.labels()) {
    if (!l.box.has_3d) continue;
    auto [it, inserted] = out.emplace(*l.box.track_id, &l);
    if (!inserted && it->second->tag < l.tag) it->second = &l;
  }
  return out;
}

}  // namespace

EvalReport evaluate(const LabelSet& labels, const SceneBundle& scene, const EvalConfig& cfg,
                    const LabelSet* pseudo_reference) {
  if (!scene.truth) throw Error(ErrorCode::InvalidInput, "evaluation needs a scene with truth");
  cfg.validate();
  const FrameIndex frames(scene.frames);
  const std::map<TrackId, FrameId> anchors = [&] {
    std::map<TrackId, FrameId> m;
    for (const auto& [t, f] : anchor_frames(scene.boxes)) m.emplace(t, f);
    return m;
  }();

  std::vector<EvalObject> gts;
  std::vector<TrackId> gt_tracks;
  for (const auto& [track, anchor] : anchors) {
    const TruthObject* obj = scene.truth->object(track);
    if (obj == nullptr) continue;
    const CameraFrame& frame = frames.at(anchor);
    EvalObject g;
    g.box = obj->box_at(anchor);
    g.sensor = frame.pose.camera_center();
    g.depth = camera_depth(frame.pose, g.box.center);
    gts.push_back(g);
    gt_tracks.push_back(track);
  }

  const auto predicted = latest_3d(labels);
  std::vector<EvalObject> preds;
  for (const auto& [track, label] : predicted) {
    EvalObject p;
    p.box = label->box;
    std::optional<FrameId> anchor = label->anchor_frame;
    if (!anchor) {
      auto it = anchors.find(track);
      if (it != anchors.end()) anchor = it->second;
    }
    const CameraFrame& frame = anchor ? frames.at(*anchor) : scene.frames.front();
    p.sensor = frame.pose.camera_center();
    p.depth = camera_depth(frame.pose, p.box.center);
    preds.push_back(p);
  }

  ordered_json report;
  report["n_gt"] = gts.size();
  report["n_pred"] = preds.size();
  std::string csv = "metric,criterion,threshold,rank,score,recall,precision\n";
  report["metrics"] = ordered_json::array();
  report["buckets"] = ordered_json::array();
  for (const auto& entry : metric_entries(cfg)) {
    const ApResult r = average_precision(preds, gts, entry.options, cfg);
    const char* crit = entry.options.criterion == Criterion::LET ? "let" : "iou";
    report["metrics"].push_back({{"name", entry.name},
                                 {"criterion", crit},
                                 {"threshold", entry.options.threshold},
                                 {"value", r.ap},
                                 {"defined", r.defined}});
    for (std::size_t k = 0; k < r.curve.size(); ++k) {
      csv += fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g}\n", entry.name, crit,
                         entry.options.threshold, k + 1, r.curve[k].score, r.curve[k].recall,
                         r.curve[k].precision);
    }
    for (const auto& b : bucket_report(preds, gts, entry.options, cfg)) {
      report["buckets"].push_back({{"name", entry.name},
                                   {"criterion", crit},
                                   {"threshold", entry.options.threshold},
                                   {"bucket", b.bucket.name()},
                                   {"n_gt", b.result.n_gt},
                                   {"value", b.result.ap},
                                   {"defined", b.result.defined}});
    }
  }

  const auto reference = latest_3d(pseudo_reference != nullptr ? *pseudo_reference : labels);
  std::vector<std::pair<double, double>> with_pairs;
  std::vector<std::pair<double, double>> without_pairs;
  std::size_t n_with = 0;
  std::size_t n_without = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const TrackId track = gt_tracks[i];
    const bool covered = reference.count(track) > 0;
    (covered ? n_with : n_without) += 1;
    auto it = predicted.find(track);
    if (it == predicted.end()) continue;
    const CameraFrame& frame = frames.at(anchors.at(track));
    const double pred_depth = camera_depth(frame.pose, it->second->box.center);
    if (!(pred_depth > 0.0) || !(gts[i].depth > 0.0)) continue;
    (covered ? with_pairs : without_pairs).emplace_back(pred_depth, gts[i].depth);
  }
  report["pseudo_label_coverage"] =
      gts.empty() ? 0.0 : static_cast<double>(n_with) / static_cast<double>(gts.size());
  report["depth"] = {{"with_pseudo_label", depth_group(n_with, with_pairs)},
                     {"without_pseudo_label", depth_group(n_without, without_pairs)}};

  EvalReport out;
  out.text = render_text(report);
  out.json = std::move(report);
  out.pr_csv = std::move(csv);
  return out;
}

}  // namespace gba
