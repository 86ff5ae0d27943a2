#pragma once

#include <json.hpp>
#include <string>

#include "gba/evalmetrics.hpp"
#include "gba/labels.hpp"
#include "gba/simulate.hpp"

namespace gba {

struct EvalReport {
  nlohmann::ordered_json json;
  std::string text;    // aligned-column rendering of `json`
  std::string pr_csv;  // metric,threshold,rank,score,recall,precision
};

/// Scores a label set against the scene's ground truth. Every truth object
/// with at least one 2D box is a ground-truth instance, placed at its anchor
/// frame. Depth statistics are split by whether `pseudo_reference` (defaults
/// to `labels`) holds a 3D label for the track. Throws InvalidInput when the
/// scene has no truth.
EvalReport evaluate(const LabelSet& labels, const SceneBundle& scene, const EvalConfig& cfg,
                    const LabelSet* pseudo_reference = nullptr);

}  // namespace gba
