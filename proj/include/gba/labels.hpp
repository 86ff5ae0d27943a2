#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gba/box3d.hpp"
#include "gba/geom.hpp"
#include "gba/triangulate.hpp"

namespace gba {

struct GenerationTag {
  enum class Kind { PseudoInitial, Predicted };
  Kind kind = Kind::PseudoInitial;
  int iteration = 0;  // meaningful for Predicted only

  static GenerationTag pseudo_initial() { return {}; }
  static GenerationTag predicted(int iteration) { return {Kind::Predicted, iteration}; }
  /// PSEUDO_INITIAL -> PREDICTED(0), PREDICTED(k) -> PREDICTED(k + 1).
  GenerationTag advanced() const;
  std::string name() const;

  bool operator==(const GenerationTag&) const = default;
  auto operator<=>(const GenerationTag&) const = default;
};

struct Label {
  OrientedBox3D box;  // box.track_id is always set
  GenerationTag tag;
  std::optional<FrameId> anchor_frame;  // frame with the largest 2D box of the track
  bool complete = false;  // passed the length-based completeness check

  bool operator==(const Label&) const = default;
};

/// Labels keyed by (track_id, tag), kept sorted by that key.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<Label> labels);

  /// Throws InvalidInput on a missing track id or a duplicate key.
  void insert(Label label);
  const std::vector<Label>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const Label* find(TrackId track, const GenerationTag& tag) const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<Label> labels_;
};

struct DepthRange {
  double min_m = 0.5;
  double max_m = 200.0;
};

inline constexpr DepthRange kInitialTrainingRange{0.5, 200.0};
inline constexpr DepthRange kSelfRetrainingRange{0.5, 75.0};

/// Demotes 3D labels whose anchor-frame depth lies outside the closed range
/// to 2D-only. Never removes a label.
LabelSet select_by_depth(const LabelSet& labels, DepthRange range, const FrameIndex& frames);

/// Initial labels plus predictions scoring at least `score_floor`. On a track
/// collision a 3D initial label wins; a 2D-only initial label is replaced by
/// the qualifying prediction.
LabelSet merge_keep_initial(const LabelSet& initial, const LabelSet& predicted, double score_floor);

/// The last predictions, verbatim, with every generation tag advanced.
LabelSet merge_replace(const LabelSet& predicted_last);

}  // namespace gba
