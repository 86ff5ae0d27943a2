// Command-line front end for pseudo-label generation and evaluation.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "gba/config.hpp"
#include "gba/error.hpp"
#include "gba/evaluate.hpp"
#include "gba/global_ba.hpp"
#include "gba/io.hpp"
#include "gba/parallel.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kGateSkipped = 3,
  kDegenerateInput = 4,
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
};

gba::PipelineConfig load_config(const CommonOptions& common) {
  gba::PipelineConfig cfg;
  if (!common.config_path.empty()) gba::apply_config_file(cfg, common.config_path);
  for (const auto& o : common.overrides) gba::apply_override(cfg, o);
  cfg.validate();
  if (common.threads > 0) gba::set_thread_count(common.threads);
  return cfg;
}

gba::GlobalBaOptions ba_options(const gba::PipelineConfig& cfg) {
  gba::GlobalBaOptions opt;
  opt.ba = cfg.ba;
  opt.cluster = cfg.cluster;
  opt.fit = cfg.fit;
  opt.range = cfg.initial_range;
  return opt;
}

nlohmann::ordered_json diagnostics_json(const gba::GlobalBaDiagnostics& d) {
  nlohmann::ordered_json j;
  j["gate_skipped"] = d.gate_skipped;
  j["n_tracks"] = d.n_tracks;
  j["n_initialized"] = d.n_initialized;
  j["n_refined"] = d.n_refined;
  j["dropped"] = nlohmann::ordered_json::object();
  for (const auto& [reason, n] : d.dropped) j["dropped"][reason] = n;
  j["n_object_tracks"] = d.n_object_tracks;
  j["n_clusters"] = d.n_clusters;
  j["n_degenerate"] = d.n_degenerate;
  j["n_complete"] = d.n_complete;
  j["n_labels_3d"] = d.n_labels_3d;
  j["n_labels_2d"] = d.n_labels_2d;
  return j;
}

gba::DepthRange parse_range(const std::vector<double>& v) {
  if (v.size() != 2) throw gba::Error(gba::ErrorCode::ConfigError, "--range expects two values");
  return {v[0], v[1]};
}

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "TOML-style config file");
  cmd->add_option("--set", common.overrides, "Override, e.g. --set cluster.theta=50");
  cmd->add_option("--threads", common.threads, "Worker threads (default: $GBA_THREADS or all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo 3D box generation from monocular video geometry"};
  app.require_subcommand(1);
  CommonOptions common;

  std::string scene_dir;
  std::string out_path;
  std::uint64_t seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scene directory");
  simulate->add_option("--seed", seed, "Random seed")->required();
  simulate->add_option("--out", out_path, "Output scene directory")->required();
  add_common(simulate, common);

  auto* triangulate = app.add_subcommand("triangulate", "Triangulate and refine observation tracks");
  triangulate->add_option("--scene", scene_dir, "Scene directory")->required();
  triangulate->add_option("--out", out_path, "points.jsonl to write")->required();
  add_common(triangulate, common);

  std::string points_path;
  auto* cluster = app.add_subcommand("cluster", "DoubleCluster refined points into object clusters");
  cluster->add_option("--scene", scene_dir, "Scene directory")->required();
  cluster->add_option("--points", points_path, "points.jsonl")->required();
  cluster->add_option("--out", out_path, "clusters.jsonl to write")->required();
  add_common(cluster, common);

  std::string clusters_path;
  auto* fit = app.add_subcommand("fit", "Fit 7-DoF boxes to clusters and emit labels");
  fit->add_option("--scene", scene_dir, "Scene directory")->required();
  fit->add_option("--clusters", clusters_path, "clusters.jsonl")->required();
  fit->add_option("--out", out_path, "labels.jsonl to write")->required();
  add_common(fit, common);

  bool with_eval = true;
  auto* run = app.add_subcommand("run", "Full pipeline: scene directory to labels.jsonl");
  run->add_option("--scene", scene_dir, "Scene directory")->required();
  run->add_option("--out", out_path, "Output directory")->required();
  run->add_flag("!--no-eval", with_eval, "Skip evaluation even when truth is present");
  add_common(run, common);

  std::string labels_path;
  std::vector<double> range;
  auto* select = app.add_subcommand("select", "Demote labels outside a depth range to 2D-only");
  select->add_option("--labels", labels_path, "labels.jsonl")->required();
  select->add_option("--scene", scene_dir, "Scene directory (for camera poses)")->required();
  select->add_option("--range", range, "min max in meters (default: labels.retrain_depth_range)")
      ->expected(2);
  select->add_option("--out", out_path, "labels.jsonl to write")->required();
  add_common(select, common);

  std::string strategy;
  std::string initial_path;
  std::string predicted_path;
  double score_floor = -1.0;
  auto* merge = app.add_subcommand("merge", "Combine label sets for self-retraining");
  merge->add_option("--strategy", strategy, "keep-initial | replace")
      ->required()
      ->check(CLI::IsMember({"keep-initial", "replace"}));
  merge->add_option("--initial", initial_path, "Initial pseudo labels (keep-initial)");
  merge->add_option("--predicted", predicted_path, "Predicted labels")->required();
  merge->add_option("--score-floor", score_floor, "Minimum prediction score (keep-initial)");
  merge->add_option("--out", out_path, "labels.jsonl to write")->required();
  add_common(merge, common);

  std::string pseudo_path;
  auto* eval = app.add_subcommand("eval", "Evaluate labels against scene truth");
  eval->add_option("--labels", labels_path, "labels.jsonl")->required();
  eval->add_option("--scene", scene_dir, "Scene directory with truth.jsonl")->required();
  eval->add_option("--pseudo", pseudo_path, "Pseudo labels used to split depth statistics");
  eval->add_option("--out", out_path, "Output directory")->required();
  add_common(eval, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    const gba::PipelineConfig cfg = load_config(common);

    if (*simulate) {
      gba::SimConfig sim = cfg.sim;
      sim.seed = seed;
      gba::io::write_scene(gba::simulate(sim), out_path);
      return kOk;
    }

    if (*triangulate) {
      const auto scene = gba::io::read_scene(scene_dir);
      const gba::FrameIndex frames(scene.frames);
      if (!gba::parallax_gate(scene.frames, cfg.ba)) {
        std::cerr << "camera baseline below the parallax gate; reconstruction skipped\n";
        gba::io::write_file(out_path, "");
        return kGateSkipped;
      }
      const auto init = gba::initialize_points(scene.tracks, frames, cfg.ba);
      const auto refined = gba::refine_points(init.points, scene.tracks, frames, cfg.ba);
      gba::io::write_file(out_path, gba::io::points_to_jsonl(refined.points));
      std::cerr << fmt::format("{} tracks, {} triangulated, {} kept\n", scene.tracks.size(),
                               init.points.size(), refined.points.size());
      return kOk;
    }

    if (*cluster) {
      const auto scene = gba::io::read_scene(scene_dir);
      const gba::FrameIndex frames(scene.frames);
      const auto points = gba::io::points_from_jsonl(gba::io::read_file(points_path));
      const auto clusters = gba::double_cluster(points, frames, scene.boxes, cfg.cluster);
      gba::io::write_file(out_path, gba::io::clusters_to_jsonl(clusters));
      return kOk;
    }

    if (*fit) {
      const auto scene = gba::io::read_scene(scene_dir);
      const gba::FrameIndex frames(scene.frames);
      const auto clusters = gba::io::clusters_from_jsonl(gba::io::read_file(clusters_path));
      const auto labels = gba::labels_from_clusters(clusters, scene.boxes, frames, ba_options(cfg));
      gba::io::write_file(out_path, gba::io::labels_to_jsonl(labels));
      return kOk;
    }

    if (*run) {
      const auto scene = gba::io::read_scene(scene_dir);
      const auto result = gba::run_global_ba(scene, ba_options(cfg));
      const fs::path out_dir(out_path);
      gba::io::write_file(out_dir / "labels.jsonl", gba::io::labels_to_jsonl(result.labels));
      nlohmann::ordered_json report;
      report["diagnostics"] = diagnostics_json(result.diagnostics);
      if (with_eval && scene.truth) {
        const auto ev = gba::evaluate(result.labels, scene, cfg.eval);
        report["evaluation"] = ev.json;
        gba::io::write_file(out_dir / "report.txt", ev.text);
        gba::io::write_file(out_dir / "pr_curves.csv", ev.pr_csv);
      }
      gba::io::write_file(out_dir / "report.json", report.dump(2) + "\n");
      if (result.diagnostics.gate_skipped) {
        std::cerr << "camera baseline below the parallax gate; all labels are 2D-only\n";
        return kGateSkipped;
      }
      return kOk;
    }

    if (*select) {
      const auto scene = gba::io::read_scene(scene_dir);
      const gba::FrameIndex frames(scene.frames);
      const auto labels = gba::io::labels_from_jsonl(gba::io::read_file(labels_path));
      const gba::DepthRange r = range.empty() ? cfg.retrain_range : parse_range(range);
      gba::io::write_file(out_path, gba::io::labels_to_jsonl(gba::select_by_depth(labels, r, frames)));
      return kOk;
    }

    if (*merge) {
      const auto predicted = gba::io::labels_from_jsonl(gba::io::read_file(predicted_path));
      gba::LabelSet merged;
      if (strategy == "replace") {
        merged = gba::merge_replace(predicted);
      } else {
        if (initial_path.empty()) {
          throw gba::Error(gba::ErrorCode::ConfigError, "keep-initial needs --initial");
        }
        const auto initial = gba::io::labels_from_jsonl(gba::io::read_file(initial_path));
        merged = gba::merge_keep_initial(initial, predicted,
                                         score_floor >= 0.0 ? score_floor : cfg.score_floor);
      }
      gba::io::write_file(out_path, gba::io::labels_to_jsonl(merged));
      return kOk;
    }

    if (*eval) {
      const auto scene = gba::io::read_scene(scene_dir);
      const auto labels = gba::io::labels_from_jsonl(gba::io::read_file(labels_path));
      std::optional<gba::LabelSet> pseudo;
      if (!pseudo_path.empty()) pseudo = gba::io::labels_from_jsonl(gba::io::read_file(pseudo_path));
      const auto ev = gba::evaluate(labels, scene, cfg.eval, pseudo ? &*pseudo : nullptr);
      const fs::path out_dir(out_path);
      gba::io::write_file(out_dir / "report.json", ev.json.dump(2) + "\n");
      gba::io::write_file(out_dir / "report.txt", ev.text);
      gba::io::write_file(out_dir / "pr_curves.csv", ev.pr_csv);
      std::cout << ev.text;
      return kOk;
    }
  } catch (const gba::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case gba::ErrorCode::ConfigError: return kConfigError;
      case gba::ErrorCode::DegenerateCluster:
      case gba::ErrorCode::DegenerateGeometry:
      case gba::ErrorCode::InvalidInput:
      case gba::ErrorCode::InvalidCamera: return kDegenerateInput;
      default: return kFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
