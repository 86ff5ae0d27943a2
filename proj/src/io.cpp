#include "gba/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "gba/error.hpp"

namespace gba::io {
namespace {

using nlohmann::json;

// Negative zero is written as 0 so that a parse/write cycle is byte-stable.
std::string format_number(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "cannot serialize a non-finite number");
  return fmt::format("{:.17g}", v == 0.0 ? 0.0 : v);
}

// Builds one JSON object per line with a fixed key order.
class Line {
 public:
  Line& num(std::string_view key, double v) {
    sep(key);
    out_ += format_number(v);
    return *this;
  }
  Line& integer(std::string_view key, std::int64_t v) {
    sep(key);
    out_ += fmt::format("{}", v);
    return *this;
  }
  Line& boolean(std::string_view key, bool v) {
    sep(key);
    out_ += v ? "true" : "false";
    return *this;
  }
  Line& str(std::string_view key, const std::string& v) {
    sep(key);
    out_ += json(v).dump();
    return *this;
  }
  Line& null(std::string_view key) {
    sep(key);
    out_ += "null";
    return *this;
  }
  template <typename Range>
  Line& nums(std::string_view key, const Range& values) {
    sep(key);
    out_ += '[';
    bool first = true;
    for (double v : values) {
      if (!first) out_ += ',';
      out_ += format_number(v);
      first = false;
    }
    out_ += ']';
    return *this;
  }
  template <typename Range>
  Line& ints(std::string_view key, const Range& values) {
    sep(key);
    out_ += '[';
    bool first = true;
    for (auto v : values) {
      if (!first) out_ += ',';
      out_ += fmt::format("{}", v);
      first = false;
    }
    out_ += ']';
    return *this;
  }
  std::string finish() { return out_ + "}\n"; }

 private:
  void sep(std::string_view key) {
    out_ += out_.size() == 1 ? "\"" : ",\"";
    out_ += key;
    out_ += "\":";
  }
  std::string out_ = "{";
};

template <typename Fn>
void for_each_record(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidInput,
                  fmt::format("line {}: {}", line_no, e.what()));
    }
  }
}

double num(const json& j, const char* key) {
  const json& v = j.at(key);
  if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  return v.get<double>();
}

void box_fields(Line& line, const OrientedBox3D& b) {
  line.num("cx", b.center.x()).num("cy", b.center.y()).num("cz", b.center.z());
  line.num("w", b.width).num("h", b.height).num("l", b.length).num("yaw", b.yaw);
}

OrientedBox3D box_from(const json& j) {
  OrientedBox3D b;
  b.center = Point3(num(j, "cx"), num(j, "cy"), num(j, "cz"));
  b.width = num(j, "w");
  b.height = num(j, "h");
  b.length = num(j, "l");
  b.yaw = num(j, "yaw");
  if (j.contains("score")) b.score = num(j, "score");
  if (j.contains("class_label")) b.class_label = j.at("class_label").get<std::string>();
  return b;
}

}  // namespace

std::string frames_to_jsonl(const std::vector<CameraFrame>& frames) {
  std::vector<const CameraFrame*> sorted;
  for (const auto& f : frames) sorted.push_back(&f);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](auto* a, auto* b) { return a->frame_id < b->frame_id; });
  std::string out;
  for (const CameraFrame* f : sorted) {
    const auto& k = f->intrinsics;
    const auto& r = f->pose.rotation();
    const std::vector<double> rows{r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1),
                                   r(1, 2), r(2, 0), r(2, 1), r(2, 2)};
    const auto& t = f->pose.translation();
    Line line;
    line.integer("frame_id", f->frame_id)
        .num("fx", k.fx).num("fy", k.fy).num("cx", k.cx).num("cy", k.cy)
        .integer("width", k.width).integer("height", k.height)
        .nums("R", rows)
        .nums("t", std::vector<double>{t.x(), t.y(), t.z()});
    out += line.finish();
  }
  return out;
}

std::vector<CameraFrame> frames_from_jsonl(const std::string& text) {
  std::vector<CameraFrame> frames;
  for_each_record(text, [&](const json& j) {
    CameraFrame f;
    f.frame_id = j.at("frame_id").get<FrameId>();
    f.intrinsics = {num(j, "fx"), num(j, "fy"), num(j, "cx"), num(j, "cy"),
                    j.at("width").get<int>(), j.at("height").get<int>()};
    const auto r = j.at("R").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw Error(ErrorCode::InvalidInput, "pose needs R[9] and t[3]");
    Eigen::Matrix3d rot;
    rot << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
    f.pose = Pose(rot, Eigen::Vector3d(t[0], t[1], t[2]));
    frames.push_back(f);
  });
  std::stable_sort(frames.begin(), frames.end(),
                   [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });
  return frames;
}

std::string boxes_to_jsonl(const std::vector<TrackedBox2D>& boxes) {
  std::vector<const TrackedBox2D*> sorted;
  for (const auto& b : boxes) sorted.push_back(&b);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
    return std::pair(a->track_id, a->frame_id) < std::pair(b->track_id, b->frame_id);
  });
  std::string out;
  for (const TrackedBox2D* b : sorted) {
    Line line;
    line.integer("track_id", b->track_id).integer("frame_id", b->frame_id)
        .num("u_min", b->box.u_min).num("v_min", b->box.v_min)
        .num("u_max", b->box.u_max).num("v_max", b->box.v_max)
        .str("class_label", b->class_label);
    out += line.finish();
  }
  return out;
}

std::vector<TrackedBox2D> boxes_from_jsonl(const std::string& text) {
  std::vector<TrackedBox2D> boxes;
  for_each_record(text, [&](const json& j) {
    TrackedBox2D b;
    b.track_id = j.at("track_id").get<TrackId>();
    b.frame_id = j.at("frame_id").get<FrameId>();
    b.box = {num(j, "u_min"), num(j, "v_min"), num(j, "u_max"), num(j, "v_max")};
    if (j.contains("class_label")) b.class_label = j.at("class_label").get<std::string>();
    boxes.push_back(b);
  });
  std::stable_sort(boxes.begin(), boxes.end(), [](const auto& a, const auto& b) {
    return std::pair(a.track_id, a.frame_id) < std::pair(b.track_id, b.frame_id);
  });
  return boxes;
}

std::string observations_to_jsonl(const std::vector<ObservationTrack>& tracks) {
  std::vector<const ObservationTrack*> sorted;
  for (const auto& t : tracks) sorted.push_back(&t);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](auto* a, auto* b) { return a->point_id < b->point_id; });
  std::string out;
  for (const ObservationTrack* t : sorted) {
    std::vector<Observation> obs = t->observations;
    std::stable_sort(obs.begin(), obs.end(),
                     [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });
    for (const auto& o : obs) {
      Line line;
      line.integer("point_id", t->point_id).integer("frame_id", o.frame_id)
          .num("u", o.pixel.u).num("v", o.pixel.v);
      out += line.finish();
    }
  }
  return out;
}

std::vector<ObservationTrack> observations_from_jsonl(const std::string& text) {
  std::map<PointId, ObservationTrack> by_id;
  for_each_record(text, [&](const json& j) {
    const PointId id = j.at("point_id").get<PointId>();
    auto& track = by_id[id];
    track.point_id = id;
    track.observations.push_back({j.at("frame_id").get<FrameId>(), {num(j, "u"), num(j, "v")}});
  });
  std::vector<ObservationTrack> out;
  out.reserve(by_id.size());
  for (auto& [id, t] : by_id) {
    std::stable_sort(t.observations.begin(), t.observations.end(),
                     [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });
    out.push_back(std::move(t));
  }
  return out;
}

std::string truth_to_jsonl(const SceneTruth& truth) {
  std::string out;
  for (const auto& o : truth.objects) {
    Line line;
    line.str("kind", "object").integer("track_id", o.track_id);
    box_fields(line, o.box);
    line.str("class_label", o.box.class_label).boolean("moving", o.moving)
        .nums("velocity", std::vector<double>{o.velocity.x(), o.velocity.y(), o.velocity.z()});
    out += line.finish();
  }
  for (const auto& p : truth.points) {
    Line line;
    line.str("kind", "point").integer("point_id", p.point_id).integer("object_id", p.object_id)
        .num("x", p.position.x()).num("y", p.position.y()).num("z", p.position.z());
    out += line.finish();
  }
  return out;
}

SceneTruth truth_from_jsonl(const std::string& text) {
  SceneTruth truth;
  for_each_record(text, [&](const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "object") {
      TruthObject o;
      o.track_id = j.at("track_id").get<TrackId>();
      o.box = box_from(j);
      o.box.track_id = o.track_id;
      o.moving = j.at("moving").get<bool>();
      const auto v = j.at("velocity").get<std::vector<double>>();
      if (v.size() != 3) throw Error(ErrorCode::InvalidInput, "velocity needs 3 components");
      o.velocity = Eigen::Vector3d(v[0], v[1], v[2]);
      truth.objects.push_back(o);
    } else if (kind == "point") {
      truth.points.push_back({j.at("point_id").get<PointId>(), j.at("object_id").get<TrackId>(),
                              Point3(num(j, "x"), num(j, "y"), num(j, "z"))});
    } else {
      throw Error(ErrorCode::InvalidInput, "unknown truth record kind " + kind);
    }
  });
  std::stable_sort(truth.objects.begin(), truth.objects.end(),
                   [](const auto& a, const auto& b) { return a.track_id < b.track_id; });
  std::stable_sort(truth.points.begin(), truth.points.end(),
                   [](const auto& a, const auto& b) { return a.point_id < b.point_id; });
  return truth;
}

std::string labels_to_jsonl(const LabelSet& labels) {
  std::string out;
  for (const auto& l : labels.labels()) {
    Line line;
    line.integer("track_id", *l.box.track_id).str("tag", l.tag.name())
        .integer("iteration", l.tag.iteration).boolean("has_3d", l.box.has_3d)
        .boolean("complete", l.complete);
    if (l.anchor_frame) {
      line.integer("anchor_frame", *l.anchor_frame);
    } else {
      line.null("anchor_frame");
    }
    box_fields(line, l.box);
    line.num("score", l.box.score).str("class_label", l.box.class_label);
    out += line.finish();
  }
  return out;
}

LabelSet labels_from_jsonl(const std::string& text) {
  LabelSet set;
  for_each_record(text, [&](const json& j) {
    Label l;
    l.box = box_from(j);
    l.box.track_id = j.at("track_id").get<TrackId>();
    l.box.has_3d = j.at("has_3d").get<bool>();
    const std::string tag = j.at("tag").get<std::string>();
    if (tag == "PSEUDO_INITIAL") {
      l.tag = GenerationTag::pseudo_initial();
    } else if (tag == "PREDICTED") {
      l.tag = GenerationTag::predicted(j.value("iteration", 0));
    } else {
      throw Error(ErrorCode::InvalidInput, "unknown generation tag " + tag);
    }
    l.complete = j.value("complete", false);
    if (j.contains("anchor_frame") && !j.at("anchor_frame").is_null()) {
      l.anchor_frame = j.at("anchor_frame").get<FrameId>();
    }
    set.insert(std::move(l));
  });
  return set;
}

std::string points_to_jsonl(const std::vector<WorldPoint>& points) {
  std::vector<const WorldPoint*> sorted;
  for (const auto& p : points) sorted.push_back(&p);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](auto* a, auto* b) { return a->point_id < b->point_id; });
  std::string out;
  for (const WorldPoint* p : sorted) {
    Line line;
    line.integer("point_id", p->point_id)
        .num("x", p->position.x()).num("y", p->position.y()).num("z", p->position.z())
        .num("residual_rms", p->residual_rms).integer("n_views", p->n_views);
    out += line.finish();
  }
  return out;
}

std::vector<WorldPoint> points_from_jsonl(const std::string& text) {
  std::vector<WorldPoint> points;
  for_each_record(text, [&](const json& j) {
    points.push_back({j.at("point_id").get<PointId>(), Point3(num(j, "x"), num(j, "y"), num(j, "z")),
                      num(j, "residual_rms"), j.at("n_views").get<int>()});
  });
  std::stable_sort(points.begin(), points.end(),
                   [](const auto& a, const auto& b) { return a.point_id < b.point_id; });
  return points;
}

std::string clusters_to_jsonl(const std::map<TrackId, ObjectCluster>& clusters) {
  std::string out;
  for (const auto& [track, c] : clusters) {
    std::vector<double> xyz;
    xyz.reserve(3 * c.size());
    for (const auto& p : c.points) xyz.insert(xyz.end(), {p.x(), p.y(), p.z()});
    Line line;
    line.integer("track_id", track).num("mean_residual_px", c.mean_residual_px)
        .ints("point_ids", c.member_point_ids).nums("xyz", xyz);
    out += line.finish();
  }
  return out;
}

std::map<TrackId, ObjectCluster> clusters_from_jsonl(const std::string& text) {
  std::map<TrackId, ObjectCluster> out;
  for_each_record(text, [&](const json& j) {
    ObjectCluster c;
    const TrackId track = j.at("track_id").get<TrackId>();
    c.matched_track_id = track;
    c.source = ClusterSource::GPC;
    c.mean_residual_px = num(j, "mean_residual_px");
    c.member_point_ids = j.at("point_ids").get<std::vector<PointId>>();
    const auto xyz = j.at("xyz").get<std::vector<double>>();
    if (xyz.size() != 3 * c.member_point_ids.size()) {
      throw Error(ErrorCode::InvalidInput, "xyz length does not match point_ids");
    }
    for (std::size_t i = 0; i < c.member_point_ids.size(); ++i) {
      c.points.emplace_back(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
    }
    if (!out.emplace(track, std::move(c)).second) {
      throw Error(ErrorCode::InvalidInput, "duplicate cluster for track " + std::to_string(track));
    }
  });
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
  out << content;
}

void write_scene(const SceneBundle& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "frames.jsonl", frames_to_jsonl(scene.frames));
  write_file(dir / "boxes2d.jsonl", boxes_to_jsonl(scene.boxes));
  write_file(dir / "observations.jsonl", observations_to_jsonl(scene.tracks));
  if (scene.truth) write_file(dir / "truth.jsonl", truth_to_jsonl(*scene.truth));
}

SceneBundle read_scene(const std::filesystem::path& dir) {
  SceneBundle scene;
  scene.frames = frames_from_jsonl(read_file(dir / "frames.jsonl"));
  scene.boxes = boxes_from_jsonl(read_file(dir / "boxes2d.jsonl"));
  scene.tracks = observations_from_jsonl(read_file(dir / "observations.jsonl"));
  if (std::filesystem::exists(dir / "truth.jsonl")) {
    scene.truth = truth_from_jsonl(read_file(dir / "truth.jsonl"));
  }
  scene.validate();
  return scene;
}

}  // namespace gba::io
