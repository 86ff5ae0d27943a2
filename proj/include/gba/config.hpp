#pragma once

#include <string>
#include <string_view>

#include "gba/boxfit.hpp"
#include "gba/cluster.hpp"
#include "gba/evalmetrics.hpp"
#include "gba/labels.hpp"
#include "gba/simulate.hpp"
#include "gba/triangulate.hpp"

namespace gba {

struct PipelineConfig {
  SimConfig sim;
  BaConfig ba;
  ClusterConfig cluster;
  FitConfig fit;
  EvalConfig eval;
  DepthRange initial_range = kInitialTrainingRange;
  DepthRange retrain_range = kSelfRetrainingRange;
  double score_floor = 0.5;

  void validate() const;
};

/// Applies a TOML-style document: `[section]` headers, `key = value` lines
/// with numbers, booleans, quoted strings or flat numeric arrays, `#` comments.
/// Unknown sections or keys throw Error(ConfigError).
void apply_config_text(PipelineConfig& cfg, std::string_view text);
void apply_config_file(PipelineConfig& cfg, const std::string& path);

/// `section.key=value`, same value syntax as the file format.
void apply_override(PipelineConfig& cfg, std::string_view assignment);

}  // namespace gba
