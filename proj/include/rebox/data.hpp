#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "rebox/errors.hpp"
#include "rebox/geometry.hpp"
#include "rebox/io.hpp"
#include "rebox/rng.hpp"
#include "rebox/tensor.hpp"
#include "rebox/trainer.hpp"

namespace rebox {

enum class ShapeClass : std::uint8_t { rectangle = 0, ellipse = 1, cross = 2 };

struct SceneObject {
  BoundingBox box;
  ShapeClass cls = ShapeClass::rectangle;
};

struct Scene {
  Tensor image;  // (H, W, 3), values in [0,1]
  std::vector<SceneObject> objects;
  std::uint64_t seed = 0;
};

struct SceneParams {
  int width = 512, height = 512;
  int min_objects = 3, max_objects = 8;
  double min_size = 52, max_size = 96;
  double clutter = 10;        // expected distractor blob count
  // The falloff and peak ranges are paired so the dimmest rim pixel stays
  // above the lowest threshold slice (no isolating dark ring around a shape)
  // while the first usable slice cuts the support well inside the annotation.
  // That keeps thresholded proposals systematically coarse but recallable.
  double ramp_lo = 0.73, ramp_hi = 0.79;  // luminance falloff across an object
  double color_lo = 0.42, color_hi = 0.52;  // object peak channel intensity
  double noise = 0.03;

  void validate() const {
    if (width < 64 || height < 64) throw ConfigError("scene must be at least 64x64");
    if (min_objects < 1 || max_objects < min_objects)
      throw ConfigError("object count range invalid");
    if (min_size < 8) throw ConfigError("min_size must be >= 8");
    if (max_size < min_size) throw ConfigError("max_size must be >= min_size");
    if (clutter < 0) throw ConfigError("clutter must be >= 0");
    if (ramp_lo < 0 || ramp_hi < ramp_lo || ramp_hi > 1) throw ConfigError("ramp range invalid");
    if (color_lo < 0 || color_hi < color_lo || color_hi > 1)
      throw ConfigError("color range invalid");
    if (noise < 0 || noise > 0.2) throw ConfigError("noise must be in [0, 0.2]");
  }
};

namespace detail {

inline void draw_shape(Tensor& img, const BoundingBox& b, ShapeClass cls,
                       const std::array<double, 3>& color, double ramp, double noise,
                       Rng& rng) {
  const int h = img.extent(0), w = img.extent(1);
  const double cx = (b.x1 + b.x2) / 2, cy = (b.y1 + b.y2) / 2;
  const double a = b.width() / 2, bb = b.height() / 2;
  const double bar_w = 0.25 + 0.15 * rng.uniform();  // cross bar thickness fraction
  const double bar_h = 0.25 + 0.15 * rng.uniform();

  const int y0 = std::max(0, int(std::floor(b.y1))), y1 = std::min(h, int(std::ceil(b.y2)));
  const int x0 = std::max(0, int(std::floor(b.x1))), x1 = std::min(w, int(std::ceil(b.x2)));
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      if (px < b.x1 || px >= b.x2 || py < b.y1 || py >= b.y2) continue;
      const double rx = std::abs(px - cx) / a, ry = std::abs(py - cy) / bb;
      bool inside = true;
      double r = std::max(rx, ry);
      if (cls == ShapeClass::ellipse) {
        r = std::sqrt(rx * rx + ry * ry);
        inside = r <= 1.0;
      } else if (cls == ShapeClass::cross) {
        inside = ry <= bar_w || rx <= bar_h;
      }
      if (!inside) continue;
      // Radial falloff: the core is bright, the rim fades toward background,
      // so thresholded support undershoots the annotated extent.
      const double shade = 1.0 - ramp * std::min(r, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double v = color[std::size_t(c)] * shade + rng.uniform(-noise, noise);
        img.at3(y, x, c) = float(std::clamp(v, 0.0, 1.0));
      }
    }
  }
}

}  // namespace detail

/// Composites 3-8 ramp-shaded shapes and small clutter blobs on a dark noisy
/// background. Deterministic for a (params, seed) pair; the seed is recorded
/// on the scene so downstream proposal jitter can reuse it.
inline Scene generate_scene(const SceneParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng = derive_stream(seed, "scene.gen");
  Scene scene;
  scene.seed = seed;
  scene.image = Tensor({params.height, params.width, 3});
  const int h = params.height, w = params.width;

  // Background: dark base, coarse smooth variation, per-pixel noise.
  const int cell = 64;
  const int gh = h / cell + 2, gw = w / cell + 2;
  std::vector<double> grid(std::size_t(gh) * gw);
  for (auto& g : grid) g = rng.uniform(-1.0, 1.0);
  for (int y = 0; y < h; ++y) {
    const double fy = double(y) / cell;
    const int iy = int(fy);
    const double ty = fy - iy;
    for (int x = 0; x < w; ++x) {
      const double fx = double(x) / cell;
      const int ix = int(fx);
      const double tx = fx - ix;
      const double g00 = grid[std::size_t(iy) * gw + ix], g01 = grid[std::size_t(iy) * gw + ix + 1];
      const double g10 = grid[std::size_t(iy + 1) * gw + ix],
                   g11 = grid[std::size_t(iy + 1) * gw + ix + 1];
      const double smooth = (g00 * (1 - tx) + g01 * tx) * (1 - ty) +
                            (g10 * (1 - tx) + g11 * tx) * ty;
      const double base = 0.12 + 0.04 * smooth;
      for (int c = 0; c < 3; ++c)
        scene.image.at3(y, x, c) =
            float(std::clamp(base + rng.uniform(-params.noise, params.noise), 0.0, 1.0));
    }
  }

  // Objects: reject placements overlapping an existing object with IoU >= 0.2.
  const int want = params.min_objects +
                   int(rng.uniform_int(std::uint64_t(params.max_objects - params.min_objects + 1)));
  for (int i = 0; i < want; ++i) {
    BoundingBox box;
    bool placed = false;
    for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
      const double bw = rng.uniform(params.min_size, params.max_size);
      const double bh = rng.uniform(params.min_size, params.max_size);
      const double x1 = 2 + std::floor(rng.uniform() * (w - bw - 4));
      const double y1 = 2 + std::floor(rng.uniform() * (h - bh - 4));
      box = {x1, y1, x1 + std::floor(bw), y1 + std::floor(bh)};
      placed = true;
      for (const auto& o : scene.objects)
        if (iou(box, o.box) >= 0.2) {
          placed = false;
          break;
        }
    }
    if (!placed) continue;
    const auto cls = ShapeClass(rng.uniform_int(3));
    std::array<double, 3> color{};
    for (auto& c : color) c = rng.uniform(params.color_lo, params.color_hi);
    detail::draw_shape(scene.image, box, cls, color, rng.uniform(params.ramp_lo, params.ramp_hi),
                       params.noise, rng);
    scene.objects.push_back({box, cls});
  }

  // Clutter: small bright blobs, kept clear of the annotated objects.
  const int blobs = int(params.clutter);
  for (int i = 0; i < blobs; ++i) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      const double bw = rng.uniform(4, 14), bh = rng.uniform(4, 14);
      const double x1 = 2 + std::floor(rng.uniform() * (w - bw - 4));
      const double y1 = 2 + std::floor(rng.uniform() * (h - bh - 4));
      BoundingBox box{x1, y1, x1 + bw, y1 + bh};
      bool clear = true;
      for (const auto& o : scene.objects)
        if (iou(box, o.box) > 0) {
          clear = false;
          break;
        }
      if (!clear) continue;
      std::array<double, 3> color{};
      for (auto& c : color) c = rng.uniform(0.35, 0.8);
      detail::draw_shape(scene.image, box, ShapeClass(rng.uniform_int(2)), color,
                         rng.uniform(0.2, 0.5), params.noise, rng);
      break;
    }
  }
  return scene;
}

struct MstParams {
  int levels = 8;
  double dedup_iou = 0.95;
  int max_mst_boxes = 60;
  int gt_jitters = 1;
  double jitter_shift = 0.2;
  double jitter_scale_lo = 0.7, jitter_scale_hi = 1.4;
  double min_dim = 5;
  int min_area_px = 20;
  double max_area_frac = 0.5;
};

namespace detail {

struct Component {
  int min_x, min_y, max_x, max_y, pixels;
};

/// 4-connected components of a binary mask via union-find, scan order.
inline std::vector<Component> connected_components(const std::vector<std::uint8_t>& mask, int w,
                                                   int h) {
  std::vector<std::int32_t> label(std::size_t(w) * h, -1);
  std::vector<std::int32_t> parent;
  auto find = [&](std::int32_t a) {
    while (parent[std::size_t(a)] != a) {
      parent[std::size_t(a)] = parent[std::size_t(parent[std::size_t(a)])];
      a = parent[std::size_t(a)];
    }
    return a;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      if (!mask[i]) continue;
      const std::int32_t left = x > 0 && mask[i - 1] ? find(label[i - 1]) : -1;
      const std::int32_t up = y > 0 && mask[i - std::size_t(w)] ? find(label[i - std::size_t(w)]) : -1;
      if (left < 0 && up < 0) {
        label[i] = std::int32_t(parent.size());
        parent.push_back(label[i]);
      } else if (left >= 0 && up >= 0) {
        label[i] = std::min(left, up);
        parent[std::size_t(std::max(left, up))] = std::min(left, up);
      } else {
        label[i] = std::max(left, up);
      }
    }
  }
  std::vector<std::int32_t> root_to_comp(parent.size(), -1);
  std::vector<Component> comps;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      if (label[i] < 0) continue;
      const std::int32_t r = find(label[i]);
      if (root_to_comp[std::size_t(r)] < 0) {
        root_to_comp[std::size_t(r)] = std::int32_t(comps.size());
        comps.push_back({x, y, x, y, 0});
      }
      auto& c = comps[std::size_t(root_to_comp[std::size_t(r)])];
      c.min_x = std::min(c.min_x, x);
      c.min_y = std::min(c.min_y, y);
      c.max_x = std::max(c.max_x, x);
      c.max_y = std::max(c.max_y, y);
      ++c.pixels;
    }
  }
  return comps;
}

}  // namespace detail

/// Multi-scale thresholding: slice the grayscale image at evenly spaced
/// levels, box the connected components of both polarities, deduplicate, and
/// top up with jittered copies of the ground-truth boxes.
inline std::vector<BoundingBox> propose_regions(const Scene& scene,
                                                const MstParams& params = {}) {
  const int h = scene.image.extent(0), w = scene.image.extent(1);
  std::vector<float> gray(std::size_t(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      gray[std::size_t(y) * w + x] = (scene.image.at3(y, x, 0) + scene.image.at3(y, x, 1) +
                                      scene.image.at3(y, x, 2)) /
                                     3.0f;

  std::vector<BoundingBox> kept;
  auto keep_unique = [&](const BoundingBox& b) {
    for (const auto& k : kept)
      if (iou(k, b) > params.dedup_iou) return;
    kept.push_back(b);
  };

  std::vector<BoundingBox> mst;
  std::vector<std::uint8_t> mask(std::size_t(w) * h);
  for (int level = 1; level <= params.levels; ++level) {
    const float thr = float(level) / float(params.levels + 1);
    for (int polarity = 0; polarity < 2; ++polarity) {
      for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = polarity == 0 ? gray[i] > thr : gray[i] < thr;
      for (const auto& c : detail::connected_components(mask, w, h)) {
        const BoundingBox b{double(c.min_x), double(c.min_y), double(c.max_x + 1),
                            double(c.max_y + 1)};
        if (b.width() < params.min_dim || b.height() < params.min_dim) continue;
        if (c.pixels < params.min_area_px) continue;
        if (b.area() > params.max_area_frac * w * h) continue;
        mst.push_back(b);
      }
    }
  }
  std::stable_sort(mst.begin(), mst.end(),
                   [](const BoundingBox& a, const BoundingBox& b) { return a.area() > b.area(); });
  for (const auto& b : mst) {
    if (int(kept.size()) >= params.max_mst_boxes) break;
    keep_unique(b);
  }

  Rng jitter = derive_stream(scene.seed, "proposals.jitter");
  for (const auto& obj : scene.objects) {
    const CenterSize c = to_center_size(obj.box);
    for (int j = 0; j < params.gt_jitters; ++j) {
      const double f = jitter.uniform(params.jitter_scale_lo, params.jitter_scale_hi);
      const double cx = c.cx + jitter.uniform(-params.jitter_shift, params.jitter_shift) * c.w;
      const double cy = c.cy + jitter.uniform(-params.jitter_shift, params.jitter_shift) * c.h;
      BoundingBox b{cx - c.w * f / 2, cy - c.h * f / 2, cx + c.w * f / 2, cy + c.h * f / 2};
      try {
        keep_unique(clip_box(b, w, h));
      } catch (const InvalidBoxError&) {
      }
    }
  }
  return kept;
}

enum class Provenance : std::uint8_t {
  ground_truth = 0,
  mined = 1,
  size_augmented = 2,
  rotated = 3,
  flipped = 4
};

struct TrainingSample {
  Tensor patch;  // (side, side, 3)
  BoundingBox proposal, gt;
  NormalizedBox target;
  Provenance provenance = Provenance::mined;
};

/// Ground-truth boxes always become samples; every proposal with IoU >= 0.5
/// against some object becomes a sample targeting its best-overlap object.
inline std::vector<TrainingSample> mine_positives(const Scene& scene,
                                                  const std::vector<BoundingBox>& proposals,
                                                  int side) {
  std::vector<TrainingSample> samples;
  for (const auto& obj : scene.objects) {
    TrainingSample s;
    s.patch = warp_region(scene.image, obj.box, side);
    s.proposal = obj.box;
    s.gt = obj.box;
    s.target = normalize_box(s.gt, s.proposal);
    s.provenance = Provenance::ground_truth;
    samples.push_back(std::move(s));
  }
  for (const auto& p : proposals) {
    double best = 0;
    const SceneObject* best_obj = nullptr;
    for (const auto& obj : scene.objects) {
      const double v = iou(p, obj.box);
      if (v > best) {
        best = v;
        best_obj = &obj;
      }
    }
    if (best < 0.5 || !best_obj) continue;
    TrainingSample s;
    s.patch = warp_region(scene.image, p, side);
    s.proposal = p;
    s.gt = best_obj->box;
    s.target = normalize_box(s.gt, s.proposal);
    s.provenance = Provenance::mined;
    samples.push_back(std::move(s));
  }
  return samples;
}

/// Pure target-coordinate maps for the orientation augmentations. These are
/// exact (negation and swap only) and are the algebra the sample-level
/// transforms below must agree with.
inline NormalizedBox target_flip_h(const NormalizedBox& t) {
  return {-t.nx2, t.ny1, -t.nx1, t.ny2};
}
inline NormalizedBox target_flip_v(const NormalizedBox& t) {
  return {t.nx1, -t.ny2, t.nx2, -t.ny1};
}
inline NormalizedBox target_rot90(const NormalizedBox& t) {
  return {-t.ny2, t.nx1, -t.ny1, t.nx2};
}

namespace detail {

inline Tensor patch_rot90(const Tensor& p) {
  const int s = p.extent(0), ch = p.extent(2);
  Tensor out({s, s, ch});
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      for (int k = 0; k < ch; ++k) out.at3(r, c, k) = p.at3(s - 1 - c, r, k);
  return out;
}

inline Tensor patch_flip_h(const Tensor& p) {
  const int s = p.extent(0), ch = p.extent(2);
  Tensor out({s, s, ch});
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      for (int k = 0; k < ch; ++k) out.at3(r, c, k) = p.at3(r, s - 1 - c, k);
  return out;
}

inline Tensor patch_flip_v(const Tensor& p) {
  const int s = p.extent(0), ch = p.extent(2);
  Tensor out({s, s, ch});
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      for (int k = 0; k < ch; ++k) out.at3(r, c, k) = p.at3(s - 1 - r, c, k);
  return out;
}

}  // namespace detail

/// Quarter-turn of a sample: the patch rotates, the proposal keeps its center
/// with width and height swapped, and the ground truth moves to the
/// correspondingly rotated position. The target is recomputed from the new
/// absolute boxes, so target = normalize_box(gt, proposal) holds exactly.
inline TrainingSample rotate_sample_90(const TrainingSample& s) {
  TrainingSample r;
  r.patch = detail::patch_rot90(s.patch);
  const CenterSize p = to_center_size(s.proposal);
  r.proposal = to_corner_box({p.cx, p.cy, p.h, p.w});
  const NormalizedBox t = target_rot90(normalize_box(s.gt, s.proposal));
  r.gt = denormalize_box(t, r.proposal);
  r.target = normalize_box(r.gt, r.proposal);
  r.provenance = Provenance::rotated;
  return r;
}

inline TrainingSample flip_sample(const TrainingSample& s, bool horizontal) {
  TrainingSample r;
  r.patch = horizontal ? detail::patch_flip_h(s.patch) : detail::patch_flip_v(s.patch);
  r.proposal = s.proposal;
  const NormalizedBox t0 = normalize_box(s.gt, s.proposal);
  const NormalizedBox t = horizontal ? target_flip_h(t0) : target_flip_v(t0);
  r.gt = denormalize_box(t, r.proposal);
  r.target = normalize_box(r.gt, r.proposal);
  r.provenance = Provenance::flipped;
  return r;
}

struct AugmentPolicy {
  std::vector<double> sizes = {0.1, 0.2, 0.3};
  bool rotations = true;
  bool flips = true;
};

/// Expands each sample into (1 + sizes) x (1 + 3 rotations + 2 flips) copies
/// with the full default policy. Size copies re-warp the enlarged proposal
/// from the source image; orientation copies transform the patch in memory.
inline std::vector<TrainingSample> augment_samples(const Tensor& image,
                                                   const std::vector<TrainingSample>& samples,
                                                   const AugmentPolicy& policy, int side) {
  const double img_h = image.extent(0), img_w = image.extent(1);
  std::vector<TrainingSample> out;
  for (const auto& base : samples) {
    std::vector<TrainingSample> sized{base};
    for (double s : policy.sizes) {
      TrainingSample e;
      try {
        e.proposal = augment_box(base.proposal, s, img_w, img_h);
      } catch (const InvalidBoxError&) {
        continue;
      }
      e.patch = warp_region(image, e.proposal, side);
      e.gt = base.gt;
      e.target = normalize_box(e.gt, e.proposal);
      e.provenance = Provenance::size_augmented;
      sized.push_back(std::move(e));
    }
    for (const auto& sv : sized) {
      out.push_back(sv);
      if (policy.rotations) {
        TrainingSample r = rotate_sample_90(sv);
        out.push_back(r);
        r = rotate_sample_90(r);
        out.push_back(r);
        out.push_back(rotate_sample_90(r));
      }
      if (policy.flips) {
        out.push_back(flip_sample(sv, true));
        out.push_back(flip_sample(sv, false));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset file: magic "RDFD", version, count, per-sample records, CRC32.

class DatasetWriter {
 public:
  explicit DatasetWriter(std::string path)
      : path_(std::move(path)), tmp_(path_ + ".tmp"), out_(tmp_) {
    out_.str("RDFD");
    out_.u32(1);
    out_.u64(0);  // sample count, patched on finish
  }

  void add(const TrainingSample& s) {
    out_.u32(std::uint32_t(s.patch.extent(0)));
    out_.u32(std::uint32_t(s.patch.extent(1)));
    out_.u32(std::uint32_t(s.patch.extent(2)));
    out_.bytes(s.patch.data(), s.patch.numel() * sizeof(float));
    for (double v : {s.proposal.x1, s.proposal.y1, s.proposal.x2, s.proposal.y2}) out_.f64(v);
    for (double v : {s.gt.x1, s.gt.y1, s.gt.x2, s.gt.y2}) out_.f64(v);
    for (double v : {s.target.nx1, s.target.ny1, s.target.nx2, s.target.ny2})
      out_.f32(float(v));
    out_.u8(std::uint8_t(s.provenance));
    ++count_;
  }

  std::uint64_t count() const { return count_; }

  void finish() {
    out_.patch_at(8, &count_, 8);
    out_.close();
    const std::uint32_t crc = crc32_of_file(tmp_, 0);
    {
      std::ofstream app(tmp_, std::ios::binary | std::ios::app);
      app.write(reinterpret_cast<const char*>(&crc), 4);
    }
    std::filesystem::rename(tmp_, path_);
  }

 private:
  std::string path_, tmp_;
  BinWriter out_;
  std::uint64_t count_ = 0;
};

inline void write_dataset(const std::vector<TrainingSample>& samples, const std::string& path) {
  DatasetWriter w(path);
  for (const auto& s : samples) w.add(s);
  w.finish();
}

inline std::vector<TrainingSample> read_dataset(const std::string& path) {
  BinReader r(path);
  if (r.str(4) != "RDFD")
    throw FormatError(FormatError::Kind::BadMagic, "not a dataset file: " + path);
  if (r.u32() != 1) throw FormatError(FormatError::Kind::BadVersion, "unsupported dataset version");
  const std::uint64_t count = r.u64();
  std::vector<TrainingSample> samples;
  samples.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    TrainingSample s;
    const int e0 = int(r.u32()), e1 = int(r.u32()), e2 = int(r.u32());
    if (e0 < 1 || e1 < 1 || e2 < 1 || e0 > 4096 || e1 > 4096 || e2 > 16)
      throw FormatError(FormatError::Kind::Malformed, "implausible patch extents");
    s.patch = Tensor({e0, e1, e2});
    r.bytes(s.patch.data(), s.patch.numel() * sizeof(float));
    s.proposal = {r.f64(), r.f64(), r.f64(), r.f64()};
    s.gt = {r.f64(), r.f64(), r.f64(), r.f64()};
    const float t0 = r.f32(), t1 = r.f32(), t2 = r.f32(), t3 = r.f32();
    s.target = {t0, t1, t2, t3};
    const std::uint8_t prov = r.u8();
    if (prov > 4) throw FormatError(FormatError::Kind::Malformed, "bad provenance tag");
    s.provenance = Provenance(prov);
    samples.push_back(std::move(s));
  }
  r.expect_crc();
  return samples;
}

/// Flattens samples into the trainer's materialized form.
inline TrainSet to_train_set(const std::vector<TrainingSample>& samples) {
  if (samples.empty()) throw Error("cannot build a training set from zero samples");
  const int side = samples[0].patch.extent(0), ch = samples[0].patch.extent(2);
  TrainSet set;
  set.inputs = Tensor({int(samples.size()), side, side, ch});
  set.targets = Tensor({int(samples.size()), 4});
  set.sizes.resize(samples.size());
  const std::size_t elems = std::size_t(side) * side * ch;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (std::size_t(s.patch.numel()) != elems)
      throw ShapeError("mixed patch shapes in one dataset");
    std::copy_n(s.patch.data(), elems, set.inputs.data() + i * elems);
    set.targets.at2(int(i), 0) = float(s.target.nx1);
    set.targets.at2(int(i), 1) = float(s.target.ny1);
    set.targets.at2(int(i), 2) = float(s.target.nx2);
    set.targets.at2(int(i), 3) = float(s.target.ny2);
    set.sizes[i] = {s.proposal.width(), s.proposal.height()};
  }
  return set;
}

// ---------------------------------------------------------------------------
// Scene file: magic "RDFS", version, count, per-scene records, CRC32.

class SceneWriter {
 public:
  explicit SceneWriter(std::string path)
      : path_(std::move(path)), tmp_(path_ + ".tmp"), out_(tmp_) {
    out_.str("RDFS");
    out_.u32(1);
    out_.u64(0);
  }

  void add(const Scene& s) {
    out_.u64(s.seed);
    out_.u32(std::uint32_t(s.image.extent(0)));
    out_.u32(std::uint32_t(s.image.extent(1)));
    out_.u32(std::uint32_t(s.image.extent(2)));
    out_.bytes(s.image.data(), s.image.numel() * sizeof(float));
    out_.u32(std::uint32_t(s.objects.size()));
    for (const auto& o : s.objects) {
      for (double v : {o.box.x1, o.box.y1, o.box.x2, o.box.y2}) out_.f64(v);
      out_.u8(std::uint8_t(o.cls));
    }
    ++count_;
  }

  std::uint64_t count() const { return count_; }

  void finish() {
    out_.patch_at(8, &count_, 8);
    out_.close();
    const std::uint32_t crc = crc32_of_file(tmp_, 0);
    {
      std::ofstream app(tmp_, std::ios::binary | std::ios::app);
      app.write(reinterpret_cast<const char*>(&crc), 4);
    }
    std::filesystem::rename(tmp_, path_);
  }

 private:
  std::string path_, tmp_;
  BinWriter out_;
  std::uint64_t count_ = 0;
};

/// Streams scenes off disk one at a time; checksum verified incrementally and
/// at the end of iteration.
class SceneReader {
 public:
  explicit SceneReader(const std::string& path) : in_(path) {
    if (in_.str(4) != "RDFS")
      throw FormatError(FormatError::Kind::BadMagic, "not a scene file: " + path);
    if (in_.u32() != 1)
      throw FormatError(FormatError::Kind::BadVersion, "unsupported scene version");
    count_ = in_.u64();
  }

  std::uint64_t count() const { return count_; }

  bool next(Scene& out) {
    if (read_ == count_) {
      in_.expect_crc();
      return false;
    }
    out.seed = in_.u64();
    const int h = int(in_.u32()), w = int(in_.u32()), c = int(in_.u32());
    if (h < 1 || w < 1 || c != 3 || h > 8192 || w > 8192)
      throw FormatError(FormatError::Kind::Malformed, "implausible scene extents");
    out.image = Tensor({h, w, c});
    in_.bytes(out.image.data(), out.image.numel() * sizeof(float));
    out.objects.resize(in_.u32());
    for (auto& o : out.objects) {
      o.box = {in_.f64(), in_.f64(), in_.f64(), in_.f64()};
      const std::uint8_t cls = in_.u8();
      if (cls > 2) throw FormatError(FormatError::Kind::Malformed, "bad shape class");
      o.cls = ShapeClass(cls);
    }
    ++read_;
    return true;
  }

 private:
  BinReader in_;
  std::uint64_t count_ = 0, read_ = 0;
};

inline std::vector<Scene> read_scenes(const std::string& path) {
  SceneReader reader(path);
  std::vector<Scene> scenes;
  Scene s;
  while (reader.next(s)) scenes.push_back(s);
  return scenes;
}

}  // namespace rebox
