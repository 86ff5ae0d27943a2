#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gba/cluster.hpp"
#include "gba/labels.hpp"
#include "gba/simulate.hpp"
#include "gba/triangulate.hpp"

namespace gba::io {

// JSON-Lines serializers. Field names are fixed by docs/formats.md; floats use
// 17 significant digits; records are emitted in canonical id order.

std::string frames_to_jsonl(const std::vector<CameraFrame>& frames);
std::vector<CameraFrame> frames_from_jsonl(const std::string& text);

std::string boxes_to_jsonl(const std::vector<TrackedBox2D>& boxes);
std::vector<TrackedBox2D> boxes_from_jsonl(const std::string& text);

std::string observations_to_jsonl(const std::vector<ObservationTrack>& tracks);
std::vector<ObservationTrack> observations_from_jsonl(const std::string& text);

std::string truth_to_jsonl(const SceneTruth& truth);
SceneTruth truth_from_jsonl(const std::string& text);

std::string labels_to_jsonl(const LabelSet& labels);
LabelSet labels_from_jsonl(const std::string& text);

std::string points_to_jsonl(const std::vector<WorldPoint>& points);
std::vector<WorldPoint> points_from_jsonl(const std::string& text);

std::string clusters_to_jsonl(const std::map<TrackId, ObjectCluster>& clusters);
std::map<TrackId, ObjectCluster> clusters_from_jsonl(const std::string& text);

/// Scene directory: frames.jsonl, boxes2d.jsonl, observations.jsonl and,
/// when present, truth.jsonl.
void write_scene(const SceneBundle& scene, const std::filesystem::path& dir);
SceneBundle read_scene(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace gba::io
