#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rebox/data.hpp"
#include "rebox/detector.hpp"
#include "rebox/errors.hpp"
#include "rebox/network.hpp"
#include "rebox/trainer.hpp"

namespace rebox {

/// Everything a run needs, grouped into sections. Parsed from line-oriented
/// "section.key = value" text with strict unknown-key rejection; every field
/// has a default, and `to_text` echoes the fully resolved state in the same
/// format.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  SceneParams scene;
  MstParams proposals;

  int train_scenes = 2000;
  int test_scenes = 200;
  int sample_budget = 35000;

  AugmentPolicy augment;

  NetworkSpec network;
  std::string variant;  // applied before explicit network.* keys when set

  TrainConfig train;
  double val_fraction = 0.1;

  std::vector<double> s_values = default_s_values();
  std::vector<int> n_values = default_n_values();
  bool pop_vs_original = false;
  double eval_iou = 0.5;

  std::vector<std::string> compare_variants = {"basis", "wrdf", "wrdf_d"};
  std::vector<std::uint64_t> compare_seeds = {1, 2, 3};

  double gradcheck_tolerance = 1e-4;
};

namespace detail {

inline long long parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long r;
  try {
    r = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("not an integer for " + key + ": " + v);
  }
  if (used != v.size()) throw ConfigError("not an integer for " + key + ": " + v);
  return r;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::uint64_t r;
  try {
    r = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("not an unsigned integer for " + key + ": " + v);
  }
  if (used != v.size()) throw ConfigError("not an unsigned integer for " + key + ": " + v);
  return r;
}

inline double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double r = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty())
    throw ConfigError("not a number for " + key + ": " + v);
  return r;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError("not a boolean for " + key + ": " + v);
}

template <typename T, typename Fn>
std::vector<T> parse_list(const std::string& key, const std::string& v, Fn&& one) {
  std::vector<T> out;
  std::istringstream in(v);
  std::string tok;
  while (std::getline(in, tok, ','))
    if (!tok.empty()) out.push_back(one(key, tok));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& v, bool floating) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>)
      s += fmt_double(v[i]);
    else
      s += std::to_string(v[i]);
  }
  (void)floating;
  return s;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + " has no '='");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + " has empty key");
    kv[key] = val;
  }

  RunConfig c;
  using namespace detail;
  // The variant shorthand is resolved first so explicit network keys win.
  if (auto it = kv.find("network.variant"); it != kv.end()) {
    c.variant = it->second;
    if (!c.variant.empty()) apply_variant(c.network, c.variant);
    kv.erase(it);
  }

  for (const auto& [key, val] : kv) {
    if (key == "run.seed") c.seed = parse_u64(key, val);
    else if (key == "run.out_dir") c.out_dir = val;
    else if (key == "scene.width") c.scene.width = int(parse_int(key, val));
    else if (key == "scene.height") c.scene.height = int(parse_int(key, val));
    else if (key == "scene.min_objects") c.scene.min_objects = int(parse_int(key, val));
    else if (key == "scene.max_objects") c.scene.max_objects = int(parse_int(key, val));
    else if (key == "scene.min_size") c.scene.min_size = parse_double(key, val);
    else if (key == "scene.max_size") c.scene.max_size = parse_double(key, val);
    else if (key == "scene.clutter") c.scene.clutter = parse_double(key, val);
    else if (key == "scene.ramp_lo") c.scene.ramp_lo = parse_double(key, val);
    else if (key == "scene.ramp_hi") c.scene.ramp_hi = parse_double(key, val);
    else if (key == "scene.color_lo") c.scene.color_lo = parse_double(key, val);
    else if (key == "scene.color_hi") c.scene.color_hi = parse_double(key, val);
    else if (key == "scene.noise") c.scene.noise = parse_double(key, val);
    else if (key == "proposals.levels") c.proposals.levels = int(parse_int(key, val));
    else if (key == "proposals.dedup_iou") c.proposals.dedup_iou = parse_double(key, val);
    else if (key == "proposals.max_mst_boxes") c.proposals.max_mst_boxes = int(parse_int(key, val));
    else if (key == "proposals.gt_jitters") c.proposals.gt_jitters = int(parse_int(key, val));
    else if (key == "proposals.jitter_shift") c.proposals.jitter_shift = parse_double(key, val);
    else if (key == "proposals.jitter_scale_lo") c.proposals.jitter_scale_lo = parse_double(key, val);
    else if (key == "proposals.jitter_scale_hi") c.proposals.jitter_scale_hi = parse_double(key, val);
    else if (key == "proposals.min_dim") c.proposals.min_dim = parse_double(key, val);
    else if (key == "proposals.min_area_px") c.proposals.min_area_px = int(parse_int(key, val));
    else if (key == "proposals.max_area_frac") c.proposals.max_area_frac = parse_double(key, val);
    else if (key == "data.train_scenes") c.train_scenes = int(parse_int(key, val));
    else if (key == "data.test_scenes") c.test_scenes = int(parse_int(key, val));
    else if (key == "data.sample_budget") c.sample_budget = int(parse_int(key, val));
    else if (key == "augment.sizes")
      c.augment.sizes = parse_list<double>(key, val, parse_double);
    else if (key == "augment.rotations") c.augment.rotations = parse_bool(key, val);
    else if (key == "augment.flips") c.augment.flips = parse_bool(key, val);
    else if (key == "network.input_side") c.network.input_side = int(parse_int(key, val));
    else if (key == "network.input_channels") c.network.input_channels = int(parse_int(key, val));
    else if (key == "network.scale") c.network.scale = parse_double(key, val);
    else if (key == "network.recycle") c.network.recycle = parse_bool(key, val);
    else if (key == "network.recycle_taps") {
      c.network.recycle_taps.clear();
      for (long long t : parse_list<long long>(key, val, parse_int))
        c.network.recycle_taps.push_back(int(t));
    } else if (key == "network.forwarded_dropout_p")
      c.network.forwarded_dropout_p = parse_double(key, val);
    else if (key == "network.reduce_forwarded") c.network.reduce_forwarded = int(parse_int(key, val));
    else if (key == "network.cross_channel_layers")
      c.network.cross_channel_layers = int(parse_int(key, val));
    else if (key == "network.use_size_input") c.network.use_size_input = parse_bool(key, val);
    else if (key == "network.fc_dropout_p") c.network.fc_dropout_p = parse_double(key, val);
    else if (key == "train.base_lr") c.train.base_lr = parse_double(key, val);
    else if (key == "train.epoch_decay") c.train.epoch_decay = parse_double(key, val);
    else if (key == "train.momentum") c.train.momentum = parse_double(key, val);
    else if (key == "train.weight_decay") c.train.weight_decay = parse_double(key, val);
    else if (key == "train.batch_size") c.train.batch_size = int(parse_int(key, val));
    else if (key == "train.epochs") c.train.epochs = int(parse_int(key, val));
    else if (key == "train.log_every") c.train.log_every = int(parse_int(key, val));
    else if (key == "train.val_fraction") c.val_fraction = parse_double(key, val);
    else if (key == "detect.s_values")
      c.s_values = parse_list<double>(key, val, parse_double);
    else if (key == "detect.n_values") {
      c.n_values.clear();
      for (long long n : parse_list<long long>(key, val, parse_int))
        c.n_values.push_back(int(n));
    } else if (key == "detect.pop_vs_original") c.pop_vs_original = parse_bool(key, val);
    else if (key == "eval.iou_threshold") c.eval_iou = parse_double(key, val);
    else if (key == "compare.variants") {
      c.compare_variants.clear();
      std::istringstream vs(val);
      std::string tok;
      while (std::getline(vs, tok, ','))
        if (!tok.empty()) c.compare_variants.push_back(tok);
      if (c.compare_variants.empty()) throw ConfigError("empty list for " + key);
    } else if (key == "compare.seeds") {
      c.compare_seeds = parse_list<std::uint64_t>(key, val, parse_u64);
    } else if (key == "gradcheck.tolerance") c.gradcheck_tolerance = parse_double(key, val);
    else throw ConfigError("unknown config key: " + key);
  }

  if (c.network.recycle && c.network.recycle_taps.empty())
    c.network.recycle_taps = {5, 10, 15, 19};
  if (c.val_fraction < 0 || c.val_fraction >= 1)
    throw ConfigError("train.val_fraction must be in [0,1)");
  if (c.train_scenes < 1 || c.test_scenes < 0) throw ConfigError("scene counts invalid");
  if (c.sample_budget < 1) throw ConfigError("data.sample_budget must be positive");
  if (c.eval_iou <= 0 || c.eval_iou > 1) throw ConfigError("eval.iou_threshold must be in (0,1]");
  for (int n : c.n_values)
    if (n < 1) throw ConfigError("detect.n_values entries must be >= 1");
  for (double s : c.s_values)
    if (s < 0) throw ConfigError("detect.s_values entries must be >= 0");
  c.scene.validate();
  c.network.validate();
  c.train.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path));
}

inline std::string to_text(const RunConfig& c) {
  using namespace detail;
  std::ostringstream o;
  o << "run.seed = " << c.seed << "\n";
  o << "run.out_dir = " << c.out_dir << "\n";
  o << "scene.width = " << c.scene.width << "\n";
  o << "scene.height = " << c.scene.height << "\n";
  o << "scene.min_objects = " << c.scene.min_objects << "\n";
  o << "scene.max_objects = " << c.scene.max_objects << "\n";
  o << "scene.min_size = " << fmt_double(c.scene.min_size) << "\n";
  o << "scene.max_size = " << fmt_double(c.scene.max_size) << "\n";
  o << "scene.clutter = " << fmt_double(c.scene.clutter) << "\n";
  o << "scene.ramp_lo = " << fmt_double(c.scene.ramp_lo) << "\n";
  o << "scene.ramp_hi = " << fmt_double(c.scene.ramp_hi) << "\n";
  o << "scene.color_lo = " << fmt_double(c.scene.color_lo) << "\n";
  o << "scene.color_hi = " << fmt_double(c.scene.color_hi) << "\n";
  o << "scene.noise = " << fmt_double(c.scene.noise) << "\n";
  o << "proposals.levels = " << c.proposals.levels << "\n";
  o << "proposals.dedup_iou = " << fmt_double(c.proposals.dedup_iou) << "\n";
  o << "proposals.max_mst_boxes = " << c.proposals.max_mst_boxes << "\n";
  o << "proposals.gt_jitters = " << c.proposals.gt_jitters << "\n";
  o << "proposals.jitter_shift = " << fmt_double(c.proposals.jitter_shift) << "\n";
  o << "proposals.jitter_scale_lo = " << fmt_double(c.proposals.jitter_scale_lo) << "\n";
  o << "proposals.jitter_scale_hi = " << fmt_double(c.proposals.jitter_scale_hi) << "\n";
  o << "proposals.min_dim = " << fmt_double(c.proposals.min_dim) << "\n";
  o << "proposals.min_area_px = " << c.proposals.min_area_px << "\n";
  o << "proposals.max_area_frac = " << fmt_double(c.proposals.max_area_frac) << "\n";
  o << "data.train_scenes = " << c.train_scenes << "\n";
  o << "data.test_scenes = " << c.test_scenes << "\n";
  o << "data.sample_budget = " << c.sample_budget << "\n";
  o << "augment.sizes = " << fmt_list(c.augment.sizes, true) << "\n";
  o << "augment.rotations = " << (c.augment.rotations ? 1 : 0) << "\n";
  o << "augment.flips = " << (c.augment.flips ? 1 : 0) << "\n";
  o << "network.variant = " << c.variant << "\n";
  o << "network.input_side = " << c.network.input_side << "\n";
  o << "network.input_channels = " << c.network.input_channels << "\n";
  o << "network.scale = " << fmt_double(c.network.scale) << "\n";
  o << "network.recycle = " << (c.network.recycle ? 1 : 0) << "\n";
  if (!c.network.recycle_taps.empty())
    o << "network.recycle_taps = " << fmt_list(c.network.recycle_taps, false) << "\n";
  o << "network.forwarded_dropout_p = " << fmt_double(c.network.forwarded_dropout_p) << "\n";
  o << "network.reduce_forwarded = " << c.network.reduce_forwarded << "\n";
  o << "network.cross_channel_layers = " << c.network.cross_channel_layers << "\n";
  o << "network.use_size_input = " << (c.network.use_size_input ? 1 : 0) << "\n";
  o << "network.fc_dropout_p = " << fmt_double(c.network.fc_dropout_p) << "\n";
  o << "train.base_lr = " << fmt_double(c.train.base_lr) << "\n";
  o << "train.epoch_decay = " << fmt_double(c.train.epoch_decay) << "\n";
  o << "train.momentum = " << fmt_double(c.train.momentum) << "\n";
  o << "train.weight_decay = " << fmt_double(c.train.weight_decay) << "\n";
  o << "train.batch_size = " << c.train.batch_size << "\n";
  o << "train.epochs = " << c.train.epochs << "\n";
  o << "train.log_every = " << c.train.log_every << "\n";
  o << "train.val_fraction = " << fmt_double(c.val_fraction) << "\n";
  o << "detect.s_values = " << fmt_list(c.s_values, true) << "\n";
  o << "detect.n_values = " << fmt_list(c.n_values, false) << "\n";
  o << "detect.pop_vs_original = " << (c.pop_vs_original ? 1 : 0) << "\n";
  o << "eval.iou_threshold = " << fmt_double(c.eval_iou) << "\n";
  o << "compare.variants = ";
  for (std::size_t i = 0; i < c.compare_variants.size(); ++i)
    o << (i ? "," : "") << c.compare_variants[i];
  o << "\n";
  o << "compare.seeds = " << fmt_list(c.compare_seeds, false) << "\n";
  o << "gradcheck.tolerance = " << fmt_double(c.gradcheck_tolerance) << "\n";
  return o.str();
}

}  // namespace rebox
