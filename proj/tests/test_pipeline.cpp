#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "gba/config.hpp"
#include "gba/error.hpp"
#include "gba/evaluate.hpp"
#include "gba/evalmetrics.hpp"
#include "gba/global_ba.hpp"
#include "gba/io.hpp"
#include "gba/labels.hpp"
#include "gba/simulate.hpp"
#include "scene_helpers.hpp"

using namespace gba;
namespace fs = std::filesystem;

namespace {

const CameraIntrinsics kK{1000.0, 1000.0, 960.0, 640.0, 1920, 1280};

Label label_at(TrackId track, const Point3& center, FrameId anchor, double score = 0.9) {
  Label l;
  l.box.center = center;
  l.box.length = 4.5;
  l.box.width = 1.9;
  l.box.height = 1.6;
  l.box.yaw = 0.2;
  l.box.score = score;
  l.box.track_id = track;
  l.anchor_frame = anchor;
  l.complete = true;
  return l;
}

Label two_d_only(TrackId track) {
  Label l;
  l.box.track_id = track;
  l.box.has_3d = false;
  l.box.score = 0.0;
  return l;
}

double metric(const nlohmann::ordered_json& report, const std::string& name, double threshold) {
  for (const auto& m : report["metrics"]) {
    if (m["name"] == name && m["threshold"].get<double>() == threshold) return m["value"].get<double>();
  }
  FAIL("metric not found: " << name);
  return -1.0;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gba_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GBA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

SimConfig small_scene(std::uint64_t seed) {
  SimConfig sim;
  sim.n_objects = 6;
  sim.n_frames = 30;
  sim.seed = seed;
  return sim;
}

}  // namespace

TEST_CASE("simulate: fixed seed gives an identical scene") {
  const SceneBundle a = simulate(small_scene(3));
  const SceneBundle b = simulate(small_scene(3));
  CHECK(io::frames_to_jsonl(a.frames) == io::frames_to_jsonl(b.frames));
  CHECK(io::boxes_to_jsonl(a.boxes) == io::boxes_to_jsonl(b.boxes));
  CHECK(io::observations_to_jsonl(a.tracks) == io::observations_to_jsonl(b.tracks));
  CHECK(io::truth_to_jsonl(*a.truth) == io::truth_to_jsonl(*b.truth));
  CHECK(io::observations_to_jsonl(simulate(small_scene(4)).tracks) != io::observations_to_jsonl(a.tracks));
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("simulate: noiseless static scene is recovered exactly") {
  SimConfig sim = small_scene(5);
  sim.pixel_noise = 0.0;
  const SceneBundle scene = simulate(sim);
  const auto points = testutil::reconstruct(scene);
  REQUIRE(points.size() == scene.tracks.size());
  std::map<PointId, Point3> truth;
  for (const auto& p : scene.truth->points) truth[p.point_id] = p.position;
  double worst = 0.0;
  for (const auto& p : points) worst = std::max(worst, (p.position - truth.at(p.point_id)).norm());
  CHECK(worst < 1e-8);
}

TEST_CASE("simulate: boxes of static objects contain their projected points") {
  SimConfig sim = small_scene(6);
  sim.pixel_noise = 0.0;
  const SceneBundle scene = simulate(sim);
  const FrameIndex index(scene.frames);
  std::map<PointId, TrackId> owner;
  for (const auto& p : scene.truth->points) owner[p.point_id] = p.object_id;
  std::map<std::pair<TrackId, FrameId>, Box2D> box_of;
  for (const auto& b : scene.boxes) box_of[{b.track_id, b.frame_id}] = b.box;
  for (const auto& t : scene.tracks) {
    for (const auto& o : t.observations) {
      auto it = box_of.find({owner.at(t.point_id), o.frame_id});
      REQUIRE(it != box_of.end());
      CHECK(pixel_in_box(o.pixel, it->second));
    }
  }
}

TEST_CASE("simulate: fast movers rarely receive a cluster") {
  std::size_t moving = 0, unmatched = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SimConfig sim;
    sim.n_objects = 10;
    sim.n_frames = 30;
    sim.moving_fraction = 0.3;
    sim.seed = 100 + seed;
    const SceneBundle scene = simulate(sim);
    const auto points = testutil::reconstruct(scene);
    const auto clusters = double_cluster(points, FrameIndex(scene.frames), scene.boxes, ClusterConfig{});
    for (const auto& obj : scene.truth->objects) {
      if (!obj.moving) continue;
      REQUIRE(obj.velocity.norm() >= 1.0);
      ++moving;
      unmatched += clusters.count(obj.track_id) == 0 ? 1 : 0;
    }
  }
  REQUIRE(moving == 12);
  CHECK(static_cast<double>(unmatched) / static_cast<double>(moving) >= 0.9);
}

TEST_CASE("simulate: invalid configs") {
  SimConfig sim;
  sim.n_objects = 0;
  CHECK_THROWS_AS(simulate(sim), Error);
  sim = SimConfig{};
  sim.moving_fraction = 1.5;
  CHECK_THROWS_AS(simulate(sim), Error);
  sim = SimConfig{};
  sim.n_objects = 500;
  sim.n_frames = 5;
  CHECK_THROWS_AS(simulate(sim), Error);
}

TEST_CASE("anchor_frames picks the largest box, earliest on ties") {
  const std::vector<TrackedBox2D> boxes{{1, 0, {0, 0, 10, 10}}, {1, 1, {0, 0, 20, 20}},
                                        {1, 2, {5, 5, 25, 25}}, {2, 4, {0, 0, 1, 1}}};
  const auto anchors = anchor_frames(boxes);
  REQUIRE(anchors.size() == 2);
  CHECK(anchors[0] == std::pair<TrackId, FrameId>{1, 1});
  CHECK(anchors[1] == std::pair<TrackId, FrameId>{2, 4});
}

TEST_CASE("GenerationTag progression") {
  CHECK(GenerationTag::pseudo_initial().advanced() == GenerationTag::predicted(0));
  CHECK(GenerationTag::predicted(1).advanced() == GenerationTag::predicted(2));
  CHECK(GenerationTag::pseudo_initial() < GenerationTag::predicted(0));
  CHECK(GenerationTag::predicted(0) < GenerationTag::predicted(3));
  CHECK(GenerationTag::pseudo_initial().name() == "PSEUDO_INITIAL");
  CHECK(GenerationTag::predicted(2).name() == "PREDICTED");
}

TEST_CASE("LabelSet keys") {
  LabelSet set;
  set.insert(label_at(2, Point3(0, 0, 10), 0));
  set.insert(label_at(1, Point3(0, 0, 10), 0));
  CHECK(set.labels().front().box.track_id == 1);
  CHECK_THROWS_AS(set.insert(label_at(1, Point3(0, 0, 20), 0)), Error);
  Label anonymous = label_at(3, Point3(0, 0, 10), 0);
  anonymous.box.track_id.reset();
  CHECK_THROWS_AS(set.insert(anonymous), Error);
  Label next = label_at(1, Point3(0, 0, 20), 0);
  next.tag = GenerationTag::predicted(0);
  CHECK_NOTHROW(set.insert(next));
  CHECK(set.find(1, GenerationTag::predicted(0)) != nullptr);
  CHECK(set.find(1, GenerationTag::predicted(1)) == nullptr);
}

TEST_CASE("select_by_depth") {
  const std::vector<CameraFrame> frames{{0, kK, Pose::identity()}};
  const FrameIndex index(frames);
  LabelSet set;
  set.insert(label_at(1, Point3(0, 0, 100), 0));
  set.insert(label_at(2, Point3(0, 0, 40), 0));
  set.insert(two_d_only(3));

  const LabelSet retrain = select_by_depth(set, kSelfRetrainingRange, index);
  REQUIRE(retrain.size() == 3);
  CHECK_FALSE(retrain.labels()[0].box.has_3d);
  CHECK(retrain.labels()[1].box.has_3d);
  CHECK_FALSE(retrain.labels()[2].box.has_3d);

  const LabelSet initial = select_by_depth(set, kInitialTrainingRange, index);
  CHECK(initial == set);

  // Closed range.
  LabelSet edge;
  edge.insert(label_at(1, Point3(0, 0, 75), 0));
  CHECK(select_by_depth(edge, kSelfRetrainingRange, index).labels()[0].box.has_3d);

  CHECK(select_by_depth(LabelSet{}, kSelfRetrainingRange, index).empty());

  Label no_anchor = label_at(4, Point3(0, 0, 10), 0);
  no_anchor.anchor_frame.reset();
  LabelSet bad;
  bad.insert(no_anchor);
  CHECK_THROWS_AS(select_by_depth(bad, kSelfRetrainingRange, index), Error);
}

TEST_CASE("merge_keep_initial") {
  LabelSet initial, predicted;
  initial.insert(label_at(7, Point3(0, 0, 10), 0));
  initial.insert(two_d_only(8));
  Label p7 = label_at(7, Point3(1, 1, 12), 0, 0.95);
  p7.tag = GenerationTag::predicted(0);
  Label p8 = label_at(8, Point3(3, 0, 20), 0, 0.8);
  p8.tag = GenerationTag::predicted(0);
  Label p9 = label_at(9, Point3(5, 0, 30), 0, 0.7);
  p9.tag = GenerationTag::predicted(0);
  predicted.insert(p7);
  predicted.insert(p8);
  predicted.insert(p9);

  const LabelSet merged = merge_keep_initial(initial, predicted, 0.5);
  REQUIRE(merged.size() == 3);
  CHECK(merged.labels()[0] == initial.labels()[0]);  // collision on track 7 keeps the initial box
  CHECK(merged.labels()[1] == p8);                   // 2D-only initial gives way
  CHECK(merged.labels()[2] == p9);                   // disjoint track

  CHECK(merge_keep_initial(initial, predicted, 0.99) == initial);

  LabelSet a, b;
  a.insert(label_at(1, Point3(0, 0, 10), 0));
  Label q = label_at(2, Point3(0, 0, 20), 0);
  q.tag = GenerationTag::predicted(0);
  b.insert(q);
  CHECK(merge_keep_initial(a, b, 0.5).size() == 2);
}

TEST_CASE("merge_replace") {
  LabelSet last;
  Label l = label_at(1, Point3(0, 0, 10), 0);
  l.tag = GenerationTag::predicted(1);
  last.insert(l);
  const LabelSet out = merge_replace(last);
  REQUIRE(out.size() == 1);
  CHECK(out.labels()[0].box == l.box);
  CHECK(out.labels()[0].tag == GenerationTag::predicted(2));
  CHECK(merge_replace(LabelSet{}).empty());
}

TEST_CASE("run_global_ba: zero baseline is gated") {
  SimConfig sim = small_scene(7);
  sim.camera_speed = 0.0;
  const SceneBundle scene = simulate(sim);
  const GlobalBaResult r = run_global_ba(scene, GlobalBaOptions{});
  CHECK(r.diagnostics.gate_skipped);
  CHECK(r.points.empty());
  CHECK_FALSE(r.labels.empty());
  for (const auto& l : r.labels.labels()) CHECK_FALSE(l.box.has_3d);
}

TEST_CASE("run_global_ba: theta is enforced end to end") {
  SimConfig sim;
  sim.n_objects = 1;
  sim.n_frames = 30;
  sim.lateral_range = {5.0, 6.0};
  sim.ahead_margin = 0.0;
  sim.pixel_noise = 0.0;
  sim.seed = 8;
  SceneBundle scene = simulate(sim);
  REQUIRE(scene.tracks.size() > 150);

  const GlobalBaResult full = run_global_ba(scene, GlobalBaOptions{});
  REQUIRE(full.labels.size() == 1);
  CHECK(full.labels.labels()[0].box.has_3d);

  scene.tracks.resize(99);
  const GlobalBaResult cut = run_global_ba(scene, GlobalBaOptions{});
  CHECK(cut.diagnostics.n_refined == 99);
  REQUIRE(cut.labels.size() == 1);
  CHECK_FALSE(cut.labels.labels()[0].box.has_3d);
}

TEST_CASE("run_global_ba: noiseless static scene") {
  SimConfig sim = small_scene(9);
  sim.pixel_noise = 0.0;
  const SceneBundle scene = simulate(sim);
  const GlobalBaResult r = run_global_ba(scene, GlobalBaOptions{});
  // Every clustered object gets a good 3D box; an object whose box is
  // dominated by a larger occluded neighbour never reaches theta (track 2 here).
  std::size_t checked = 0;
  for (const auto& l : r.labels.labels()) {
    const TrackId track = *l.box.track_id;
    if (!r.clusters.count(track)) continue;
    ++checked;
    REQUIRE(l.box.has_3d);
    CHECK(iou3d_yaw(l.box, scene.truth->object(track)->box) >= 0.9);
    CHECK(l.tag == GenerationTag::pseudo_initial());
    CHECK(l.anchor_frame.has_value());
  }
  CHECK(checked == 4);
  CHECK(r.diagnostics.n_clusters == 4);
  CHECK(r.diagnostics.n_labels_3d + r.diagnostics.n_labels_2d == r.labels.size());
}

TEST_CASE("run_global_ba: deterministic across thread counts") {
  const SceneBundle scene = simulate(small_scene(10));
  const GlobalBaResult a = run_global_ba(scene, GlobalBaOptions{});
  const GlobalBaResult b = run_global_ba(scene, GlobalBaOptions{});
  CHECK(io::labels_to_jsonl(a.labels) == io::labels_to_jsonl(b.labels));
}

TEST_CASE("run_global_ba: a refiner hook replaces the fitted box") {
  const SceneBundle scene = simulate(small_scene(11));
  GlobalBaOptions opt;
  opt.refiner = [](const ObjectCluster&, const OrientedBox3D& box) {
    OrientedBox3D out = box;
    out.length = 4.0;
    return out;
  };
  const GlobalBaResult r = run_global_ba(scene, opt);
  for (const auto& l : r.labels.labels()) {
    if (l.box.has_3d) CHECK(l.box.length == 4.0);
  }
}

TEST_CASE("evaluate: truth labels and flipped labels") {
  SimConfig sim = small_scene(12);
  sim.n_objects = 12;
  sim.n_frames = 40;
  const SceneBundle scene = simulate(sim);
  const EvalConfig cfg;
  const LabelSet truth = testutil::truth_labels(scene);

  const auto exact = evaluate(truth, scene, cfg).json;
  for (const auto& m : exact["metrics"]) CHECK(m["value"].get<double>() == 1.0);
  CHECK(exact["pseudo_label_coverage"].get<double>() == 1.0);
  const auto& depth = exact["depth"]["with_pseudo_label"]["metrics"];
  CHECK(depth["delta_1"].get<double>() == 1.0);
  CHECK(depth["abs_rel"].get<double>() == 0.0);

  LabelSet flipped;
  for (Label l : truth.labels()) {
    l.box.yaw = wrap_full_turn(l.box.yaw + std::numbers::pi);
    flipped.insert(l);
  }
  const auto f = evaluate(flipped, scene, cfg).json;
  for (double t : cfg.iou_thresholds) {
    CHECK(metric(f, "AP", t) == 1.0);
    CHECK(metric(f, "APH_flip", t) == doctest::Approx(metric(f, "AP", t)).epsilon(1e-12));
    CHECK(metric(f, "APH", t) < metric(f, "AP", t));
  }

  SceneBundle no_truth = scene;
  no_truth.truth.reset();
  CHECK_THROWS_AS(evaluate(truth, no_truth, cfg), Error);
}

TEST_CASE("serialization round trips") {
  const SceneBundle scene = simulate(small_scene(13));
  const fs::path dir = scratch_dir("roundtrip");
  io::write_scene(scene, dir);
  const SceneBundle back = io::read_scene(dir);
  CHECK(io::frames_to_jsonl(back.frames) == io::frames_to_jsonl(scene.frames));
  CHECK(io::boxes_to_jsonl(back.boxes) == io::boxes_to_jsonl(scene.boxes));
  CHECK(io::observations_to_jsonl(back.tracks) == io::observations_to_jsonl(scene.tracks));
  REQUIRE(back.truth.has_value());
  CHECK(io::truth_to_jsonl(*back.truth) == io::truth_to_jsonl(*scene.truth));
  CHECK(back.frames[3].pose.rotation() == scene.frames[3].pose.rotation());

  const GlobalBaResult r = run_global_ba(scene, GlobalBaOptions{});
  CHECK(io::labels_from_jsonl(io::labels_to_jsonl(r.labels)) == r.labels);
  const auto pts = io::points_from_jsonl(io::points_to_jsonl(r.points));
  REQUIRE(pts.size() == r.points.size());
  CHECK(pts.front().position == r.points.front().position);
  const auto clusters = io::clusters_from_jsonl(io::clusters_to_jsonl(r.clusters));
  REQUIRE(clusters.size() == r.clusters.size());
  for (const auto& [t, c] : r.clusters) {
    CHECK(clusters.at(t).member_point_ids == c.member_point_ids);
    CHECK(clusters.at(t).points == c.points);
  }
  fs::remove_all(dir);
}

TEST_CASE("malformed records are rejected") {
  CHECK_THROWS_AS(io::labels_from_jsonl("{\"track_id\": 1}\n"), Error);
  CHECK_THROWS_AS(io::frames_from_jsonl("not json\n"), Error);
  CHECK(io::boxes_from_jsonl("").empty());
}

TEST_CASE("config parsing") {
  PipelineConfig cfg;
  apply_config_text(cfg, R"(
# comment
[sim]
n_objects = 9
occlusion = false
length_range = [4.0, 4.5]

[cluster]
theta = 50

[eval]
iou_thresholds = [0.3, 0.7]

[labels]
score_floor = 0.6
)");
  CHECK(cfg.sim.n_objects == 9);
  CHECK_FALSE(cfg.sim.occlusion);
  CHECK(cfg.sim.length_range == std::pair{4.0, 4.5});
  CHECK(cfg.cluster.theta == 50);
  CHECK(cfg.eval.iou_thresholds == std::vector{0.3, 0.7});
  CHECK(cfg.score_floor == 0.6);

  apply_override(cfg, "ba.max_residual_px=2.5");
  CHECK(cfg.ba.max_residual_px == 2.5);
  apply_override(cfg, "labels.retrain_depth_range=[1, 60]");
  CHECK(cfg.retrain_range.max_m == 60.0);

  auto code_of = [&](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidInput;
  };
  CHECK(code_of([&] { apply_override(cfg, "cluster.nope=1"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { apply_override(cfg, "nosection.theta=1"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { apply_override(cfg, "cluster.theta=abc"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { apply_override(cfg, "cluster.theta"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { apply_config_text(cfg, "theta = 3\n"); }) == ErrorCode::ConfigError);

  PipelineConfig bad;
  bad.cluster.delta1 = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("CLI exit codes and outputs") {
  const fs::path dir = scratch_dir("cli");
  const std::string scene = (dir / "scene").string();
  REQUIRE(run_cli("simulate --seed 2 --set sim.n_objects=5 --set sim.n_frames=25 --out " + scene) == 0);
  CHECK(fs::exists(dir / "scene" / "frames.jsonl"));
  CHECK(fs::exists(dir / "scene" / "truth.jsonl"));

  CHECK(run_cli("run --scene " + scene + " --out " + (dir / "out").string()) == 0);
  for (const char* f : {"labels.jsonl", "report.json", "report.txt", "pr_curves.csv"}) {
    CHECK(fs::exists(dir / "out" / f));
  }

  // Stage by stage.
  const std::string pts = (dir / "points.jsonl").string();
  const std::string cls = (dir / "clusters.jsonl").string();
  const std::string lbl = (dir / "labels.jsonl").string();
  CHECK(run_cli("triangulate --scene " + scene + " --out " + pts) == 0);
  CHECK(run_cli("cluster --scene " + scene + " --points " + pts + " --out " + cls) == 0);
  CHECK(run_cli("fit --scene " + scene + " --clusters " + cls + " --out " + lbl) == 0);
  CHECK(io::read_file(lbl) == io::read_file(dir / "out" / "labels.jsonl"));
  CHECK(run_cli("select --scene " + scene + " --labels " + lbl + " --out " + (dir / "sel.jsonl").string()) == 0);
  CHECK(run_cli("merge --strategy replace --predicted " + lbl + " --out " + (dir / "rep.jsonl").string()) == 0);
  CHECK(run_cli("merge --strategy keep-initial --initial " + lbl + " --predicted " + (dir / "rep.jsonl").string() +
                " --out " + (dir / "keep.jsonl").string()) == 0);
  CHECK(run_cli("eval --scene " + scene + " --labels " + lbl + " --out " + (dir / "ev").string()) == 0);

  // Config errors.
  CHECK(run_cli("run --scene " + scene) == 2);
  CHECK(run_cli("fit --bogus") == 2);
  CHECK(run_cli("run --scene " + scene + " --out " + (dir / "x").string() + " --set cluster.bogus=1") == 2);
  {
    std::ofstream(dir / "bad.toml") << "[cluster]\ndelta1 = -1\n";
  }
  CHECK(run_cli("run --scene " + scene + " --out " + (dir / "x").string() + " --config " +
                (dir / "bad.toml").string()) == 2);

  // Gate skip.
  const std::string still = (dir / "still").string();
  REQUIRE(run_cli("simulate --seed 3 --set sim.camera_speed=0 --set sim.n_objects=4 --out " + still) == 0);
  CHECK(run_cli("run --scene " + still + " --out " + (dir / "still_out").string()) == 3);

  // Degenerate input: observations refer to frames that are gone.
  const std::string broken = (dir / "broken").string();
  fs::copy(dir / "scene", broken);
  {
    const std::string frames = io::read_file(dir / "scene" / "frames.jsonl");
    io::write_file(fs::path(broken) / "frames.jsonl", frames.substr(0, frames.find('\n') + 1));
  }
  CHECK(run_cli("run --scene " + broken + " --out " + (dir / "broken_out").string()) == 4);
  fs::remove_all(dir);
}
