#include "gba/labels.hpp"

#include <algorithm>
#include <map>

#include "gba/error.hpp"

namespace gba {
namespace {

bool key_less(const Label& a, const Label& b) {
  if (*a.box.track_id != *b.box.track_id) return *a.box.track_id < *b.box.track_id;
  return a.tag < b.tag;
}

}  // namespace

GenerationTag GenerationTag::advanced() const {
  if (kind == Kind::PseudoInitial) return predicted(0);
  return predicted(iteration + 1);
}

std::string GenerationTag::name() const {
  return kind == Kind::PseudoInitial ? "PSEUDO_INITIAL" : "PREDICTED";
}

LabelSet::LabelSet(std::vector<Label> labels) {
  for (auto& l : labels) insert(std::move(l));
}

void LabelSet::insert(Label label) {
  if (!label.box.track_id) throw Error(ErrorCode::InvalidInput, "label without track id");
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label, key_less);
  if (it != labels_.end() && !key_less(label, *it)) {
    throw Error(ErrorCode::InvalidInput,
                "duplicate label for track " + std::to_string(*label.box.track_id));
  }
  labels_.insert(it, std::move(label));
}

const Label* LabelSet::find(TrackId track, const GenerationTag& tag) const {
  for (const auto& l : labels_) {
    if (*l.box.track_id == track && l.tag == tag) return &l;
  }
  return nullptr;
}

LabelSet select_by_depth(const LabelSet& labels, DepthRange range, const FrameIndex& frames) {
  if (!(range.min_m < range.max_m)) throw Error(ErrorCode::ConfigError, "depth range needs min < max");
  LabelSet out;
  for (Label l : labels.labels()) {
    if (l.box.has_3d) {
      if (!l.anchor_frame) {
        throw Error(ErrorCode::InvalidInput,
                    "3D label for track " + std::to_string(*l.box.track_id) + " has no anchor frame");
      }
      const double depth = camera_depth(frames.at(*l.anchor_frame).pose, l.box.center);
      if (!(depth >= range.min_m && depth <= range.max_m)) l.box.has_3d = false;
    }
    out.insert(std::move(l));
  }
  return out;
}

LabelSet merge_keep_initial(const LabelSet& initial, const LabelSet& predicted,
                            double score_floor) {
  // One label per track: initial labels first, then qualifying predictions.
  std::map<TrackId, Label> by_track;
  for (const auto& l : initial.labels()) {
    auto [it, inserted] = by_track.emplace(*l.box.track_id, l);
    if (!inserted && l.box.has_3d && !it->second.box.has_3d) it->second = l;
  }
  for (const auto& p : predicted.labels()) {
    if (!p.box.has_3d || p.box.score < score_floor) continue;
    auto it = by_track.find(*p.box.track_id);
    if (it == by_track.end()) {
      by_track.emplace(*p.box.track_id, p);
    } else if (!it->second.box.has_3d) {
      it->second = p;
    }
  }
  LabelSet out;
  for (auto& [track, l] : by_track) out.insert(std::move(l));
  return out;
}

LabelSet merge_replace(const LabelSet& predicted_last) {
  LabelSet out;
  for (Label l : predicted_last.labels()) {
    l.tag = l.tag.advanced();
    out.insert(std::move(l));
  }
  return out;
}

}  // namespace gba
