#include "gba/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <variant>
#include <vector>

#include "gba/error.hpp"

namespace gba {
namespace {

using Value = std::variant<double, bool, std::string, std::vector<double>>;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

double parse_number(std::string_view s) {
  s = trim(s);
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail("not a number: '" + std::string(s) + "'");
  return v;
}

Value parse_value(std::string_view s) {
  s = trim(s);
  if (s.empty()) fail("missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail("unterminated string");
    return std::string(s.substr(1, s.size() - 2));
  }
  if (s.front() == '[') {
    if (s.back() != ']') fail("unterminated array");
    std::vector<double> out;
    std::string_view body = trim(s.substr(1, s.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      out.push_back(parse_number(body.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return out;
  }
  return parse_number(s);
}

double as_number(const Value& v, const std::string& key) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  fail(key + " expects a number");
}

int as_int(const Value& v, const std::string& key) {
  const double d = as_number(v, key);
  if (d != std::floor(d)) fail(key + " expects an integer");
  return static_cast<int>(d);
}

bool as_bool(const Value& v, const std::string& key) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  fail(key + " expects true or false");
}

std::vector<double> as_array(const Value& v, const std::string& key) {
  if (const auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  fail(key + " expects an array");
}

std::pair<double, double> as_pair(const Value& v, const std::string& key) {
  const auto a = as_array(v, key);
  if (a.size() != 2) fail(key + " expects [min, max]");
  return {a[0], a[1]};
}

double degrees(double d) { return d * std::numbers::pi / 180.0; }

void assign(PipelineConfig& cfg, const std::string& section, const std::string& key, const Value& v) {
  const std::string name = section + "." + key;
  if (section == "sim") {
    SimConfig& s = cfg.sim;
    if (key == "n_objects") s.n_objects = as_int(v, name);
    else if (key == "n_frames") s.n_frames = as_int(v, name);
    else if (key == "camera_speed") s.camera_speed = as_number(v, name);
    else if (key == "path_curvature") s.path_curvature = as_number(v, name);
    else if (key == "camera_height") s.camera_height = as_number(v, name);
    else if (key == "focal_px") s.focal_px = as_number(v, name);
    else if (key == "image_width") s.image_width = as_int(v, name);
    else if (key == "image_height") s.image_height = as_int(v, name);
    else if (key == "length_range") s.length_range = as_pair(v, name);
    else if (key == "width_range") s.width_range = as_pair(v, name);
    else if (key == "height_range") s.height_range = as_pair(v, name);
    else if (key == "lateral_range") s.lateral_range = as_pair(v, name);
    else if (key == "ahead_margin") s.ahead_margin = as_number(v, name);
    else if (key == "min_separation") s.min_separation = as_number(v, name);
    else if (key == "surface_density") s.surface_density = as_number(v, name);
    else if (key == "pixel_noise") s.pixel_noise = as_number(v, name);
    else if (key == "moving_fraction") s.moving_fraction = as_number(v, name);
    else if (key == "moving_speed_range") s.moving_speed_range = as_pair(v, name);
    else if (key == "max_view_distance") s.max_view_distance = as_number(v, name);
    else if (key == "occlusion") s.occlusion = as_bool(v, name);
    else if (key == "seed") s.seed = static_cast<std::uint64_t>(as_number(v, name));
    else fail("unknown key " + name);
  } else if (section == "ba") {
    BaConfig& b = cfg.ba;
    if (key == "max_iterations") b.max_iterations = as_int(v, name);
    else if (key == "cost_tolerance") b.cost_tolerance = as_number(v, name);
    else if (key == "initial_damping") b.initial_damping = as_number(v, name);
    else if (key == "damping_scale") b.damping_scale = as_number(v, name);
    else if (key == "min_views") b.min_views = as_int(v, name);
    else if (key == "max_residual_px") b.max_residual_px = as_number(v, name);
    else if (key == "parallax_min_baseline_m") b.parallax_min_baseline_m = as_number(v, name);
    else fail("unknown key " + name);
  } else if (section == "cluster") {
    if (key == "delta1") cfg.cluster.delta1 = as_number(v, name);
    else if (key == "delta2") cfg.cluster.delta2 = as_number(v, name);
    else if (key == "theta") cfg.cluster.theta = as_int(v, name);
    else fail("unknown key " + name);
  } else if (section == "fit") {
    if (key == "coarse_step_deg") cfg.fit.coarse_step = degrees(as_number(v, name));
    else if (key == "refine_tolerance_deg") cfg.fit.refine_tolerance = degrees(as_number(v, name));
    else if (key == "sigma0") cfg.fit.sigma0 = as_number(v, name);
    else if (key == "sigma1") cfg.fit.sigma1 = as_number(v, name);
    else if (key == "cutoff_fraction_range") cfg.fit.cutoff_fraction_range = as_pair(v, name);
    else fail("unknown key " + name);
  } else if (section == "eval") {
    if (key == "iou_thresholds") cfg.eval.iou_thresholds = as_array(v, name);
    else if (key == "let_thresholds") cfg.eval.let_thresholds = as_array(v, name);
    else if (key == "let_longitudinal_tolerance") cfg.eval.let_longitudinal_tolerance = as_number(v, name);
    else if (key == "depth_bucket_edges") {
      const auto edges = as_array(v, name);
      if (edges.empty()) fail(name + " needs at least one edge");
      cfg.eval.depth_buckets.clear();
      for (std::size_t i = 0; i < edges.size(); ++i) {
        const double hi = i + 1 < edges.size() ? edges[i + 1] : std::numeric_limits<double>::infinity();
        cfg.eval.depth_buckets.push_back({edges[i], hi});
      }
    } else fail("unknown key " + name);
  } else if (section == "labels") {
    if (key == "initial_depth_range") {
      const auto [lo, hi] = as_pair(v, name);
      cfg.initial_range = {lo, hi};
    } else if (key == "retrain_depth_range") {
      const auto [lo, hi] = as_pair(v, name);
      cfg.retrain_range = {lo, hi};
    } else if (key == "score_floor") {
      cfg.score_floor = as_number(v, name);
    } else fail("unknown key " + name);
  } else {
    fail("unknown section [" + section + "]");
  }
}

}  // namespace

void PipelineConfig::validate() const {
  sim.validate();
  ba.validate();
  cluster.validate();
  fit.validate();
  eval.validate();
  if (!(initial_range.min_m < initial_range.max_m) || !(retrain_range.min_m < retrain_range.max_m)) {
    throw Error(ErrorCode::ConfigError, "depth ranges need min < max");
  }
}

void apply_config_text(PipelineConfig& cfg, std::string_view text) {
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("line " + std::to_string(line_no) + ": bad section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("line " + std::to_string(line_no) + ": expected key = value");
    assign(cfg, section, std::string(trim(line.substr(0, eq))), parse_value(line.substr(eq + 1)));
  }
}

void apply_config_file(PipelineConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str());
}

void apply_override(PipelineConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    fail("override must look like section.key=value");
  }
  assign(cfg, std::string(trim(assignment.substr(0, dot))),
         std::string(trim(assignment.substr(dot + 1, eq - dot - 1))),
         parse_value(assignment.substr(eq + 1)));
}

}  // namespace gba
