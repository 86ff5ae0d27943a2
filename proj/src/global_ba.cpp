#include "gba/global_ba.hpp"

#include "gba/error.hpp"
#include "gba/parallel.hpp"

namespace gba {
namespace {

Label two_d_only(TrackId track, const std::string& class_label, std::optional<FrameId> anchor) {
  Label l;
  l.box.track_id = track;
  l.box.class_label = class_label;
  l.box.has_3d = false;
  l.box.score = 0.0;
  l.anchor_frame = anchor;
  return l;
}

}  // namespace

LabelSet labels_from_clusters(const std::map<TrackId, ObjectCluster>& clusters,
                              std::span<const TrackedBox2D> boxes, const FrameIndex& frames,
                              const GlobalBaOptions& opt, GlobalBaDiagnostics* diag) {
  std::map<TrackId, std::string> class_of;
  for (const auto& b : boxes) class_of.emplace(b.track_id, b.class_label);
  const auto anchors = anchor_frames(boxes);

  std::vector<Label> labels(anchors.size());
  std::vector<char> degenerate(anchors.size(), 0);
  parallel_for(anchors.size(), [&](std::size_t i) {
    const auto [track, anchor] = anchors[i];
    labels[i] = two_d_only(track, class_of.at(track), anchor);
    auto it = clusters.find(track);
    if (it == clusters.end()) return;
    try {
      OrientedBox3D box = fit_box7(it->second, opt.fit, opt.cluster.theta);
      if (opt.refiner) box = opt.refiner(it->second, box);
      box.track_id = track;
      box.class_label = class_of.at(track);
      labels[i].box = box;
      labels[i].complete = completeness_filter(box, opt.fit);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateCluster) throw;
      degenerate[i] = 1;
    }
  });

  LabelSet fitted;
  for (auto& l : labels) fitted.insert(std::move(l));
  LabelSet selected = select_by_depth(fitted, opt.range, frames);
  if (diag != nullptr) {
    diag->n_object_tracks = anchors.size();
    diag->n_clusters = clusters.size();
    for (char d : degenerate) diag->n_degenerate += d ? 1 : 0;
    for (const auto& l : selected.labels()) {
      diag->n_complete += (l.box.has_3d && l.complete) ? 1 : 0;
      (l.box.has_3d ? diag->n_labels_3d : diag->n_labels_2d) += 1;
    }
  }
  return selected;
}

GlobalBaResult run_global_ba(const SceneBundle& scene, const GlobalBaOptions& opt) {
  opt.ba.validate();
  opt.cluster.validate();
  opt.fit.validate();
  const FrameIndex frames(scene.frames);

  GlobalBaResult result;
  auto& diag = result.diagnostics;
  diag.n_tracks = scene.tracks.size();

  if (!parallax_gate(scene.frames, opt.ba)) {
    diag.gate_skipped = true;
    result.labels = labels_from_clusters({}, scene.boxes, frames, opt, &diag);
    return result;
  }

  const InitResult init = initialize_points(scene.tracks, frames, opt.ba);
  diag.n_initialized = init.points.size();
  for (const auto& d : init.dropped) ++diag.dropped[std::string(to_string(d.reason))];

  RefineResult refined = refine_points(init.points, scene.tracks, frames, opt.ba);
  diag.n_refined = refined.points.size();
  for (const auto& d : refined.dropped) ++diag.dropped[std::string(to_string(d.reason))];

  result.clusters = double_cluster(refined.points, frames, scene.boxes, opt.cluster);
  result.labels = labels_from_clusters(result.clusters, scene.boxes, frames, opt, &diag);
  result.points = std::move(refined.points);
  return result;
}

}  // namespace gba
