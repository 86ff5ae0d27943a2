#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gba/boxfit.hpp"
#include "gba/cluster.hpp"
#include "gba/labels.hpp"
#include "gba/simulate.hpp"
#include "gba/triangulate.hpp"

namespace gba {

/// Hook for a learned box refiner; the default leaves the fitted box unchanged.
using BoxRefiner = std::function<OrientedBox3D(const ObjectCluster&, const OrientedBox3D&)>;

struct GlobalBaOptions {
  BaConfig ba;
  ClusterConfig cluster;
  FitConfig fit;
  DepthRange range = kInitialTrainingRange;
  BoxRefiner refiner;
};

struct GlobalBaDiagnostics {
  bool gate_skipped = false;
  std::size_t n_tracks = 0;       // observation tracks in
  std::size_t n_initialized = 0;  // survived DLT
  std::size_t n_refined = 0;      // survived refinement and the residual cut
  std::map<std::string, std::size_t> dropped;  // by reason
  std::size_t n_object_tracks = 0;
  std::size_t n_clusters = 0;  // matched clusters
  std::size_t n_degenerate = 0;
  std::size_t n_complete = 0;
  std::size_t n_labels_3d = 0;
  std::size_t n_labels_2d = 0;
};

struct GlobalBaResult {
  LabelSet labels;
  GlobalBaDiagnostics diagnostics;
  std::vector<WorldPoint> points;
  std::map<TrackId, ObjectCluster> clusters;
};

/// Turns matched clusters into one PSEUDO_INITIAL label per box track: fitted
/// boxes for clusters, 2D-only labels for everything else, then depth selection.
LabelSet labels_from_clusters(const std::map<TrackId, ObjectCluster>& clusters,
                              std::span<const TrackedBox2D> boxes, const FrameIndex& frames,
                              const GlobalBaOptions& opt, GlobalBaDiagnostics* diag = nullptr);

/// Parallax gate, triangulation, refinement, DoubleCluster, box fitting and
/// depth selection. A gated sequence yields 2D-only labels and
/// diagnostics.gate_skipped = true.
GlobalBaResult run_global_ba(const SceneBundle& scene, const GlobalBaOptions& opt);

}  // namespace gba
