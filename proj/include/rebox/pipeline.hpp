#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rebox/config.hpp"
#include "rebox/data.hpp"
#include "rebox/detector.hpp"
#include "rebox/eval.hpp"
#include "rebox/io.hpp"
#include "rebox/network.hpp"
#include "rebox/rng.hpp"
#include "rebox/trainer.hpp"

namespace rebox {

// ---------------------------------------------------------------------------
// Data generation: synthesize scenes, mine and augment samples, stream all of
// it to disk. Every scene gets its own seed derived from the run seed, so any
// scene can be regenerated in isolation.

struct GenResult {
  int train_scenes = 0;
  int test_scenes = 0;
  std::uint64_t samples = 0;
};

inline std::vector<TrainingSample> subsample_to_quota(std::vector<TrainingSample> samples,
                                                      std::size_t quota,
                                                      std::uint64_t scene_seed) {
  if (samples.size() <= quota) return samples;
  Rng rng = derive_stream(scene_seed, "data.subsample");
  for (std::size_t i = 0; i < quota; ++i) {
    const std::size_t j = i + std::size_t(rng.uniform_int(samples.size() - i));
    std::swap(samples[i], samples[j]);
  }
  samples.resize(quota);
  return samples;
}

inline GenResult generate_data(const RunConfig& cfg, const std::string& train_scenes_path,
                               const std::string& test_scenes_path,
                               const std::string& dataset_path,
                               std::FILE* progress = nullptr) {
  GenResult res;
  const std::size_t quota =
      (std::size_t(cfg.sample_budget) + cfg.train_scenes - 1) / std::size_t(cfg.train_scenes);

  SceneWriter train_out(train_scenes_path);
  DatasetWriter data_out(dataset_path);
  for (int i = 0; i < cfg.train_scenes; ++i) {
    const std::uint64_t scene_seed = derive_seed(cfg.seed, "data.train", std::uint64_t(i));
    Scene scene = generate_scene(cfg.scene, scene_seed);
    train_out.add(scene);

    const auto proposals = propose_regions(scene, cfg.proposals);
    const auto mined = mine_positives(scene, proposals, cfg.network.input_side);
    auto augmented = augment_samples(scene.image, mined, cfg.augment, cfg.network.input_side);
    augmented = subsample_to_quota(std::move(augmented), quota, scene_seed);
    for (const auto& s : augmented) data_out.add(s);

    if (progress && (i + 1) % 100 == 0) {
      std::fprintf(progress, "scenes %d/%d, samples %llu\n", i + 1, cfg.train_scenes,
                   (unsigned long long)data_out.count());
      std::fflush(progress);
    }
  }
  res.train_scenes = cfg.train_scenes;
  res.samples = data_out.count();
  data_out.finish();
  train_out.finish();

  SceneWriter test_out(test_scenes_path);
  for (int i = 0; i < cfg.test_scenes; ++i) {
    const std::uint64_t scene_seed = derive_seed(cfg.seed, "data.test", std::uint64_t(i));
    test_out.add(generate_scene(cfg.scene, scene_seed));
  }
  res.test_scenes = cfg.test_scenes;
  test_out.finish();
  return res;
}

// ---------------------------------------------------------------------------
// Training: load a dataset, carve off a validation split, run the optimizer,
// persist the checkpoint and loss curves.

template <typename T>
TrainSetT<T> subset_rows(const TrainSetT<T>& set, const std::vector<int>& rows) {
  TrainSetT<T> out;
  if (rows.empty()) return out;
  const int side = set.inputs.extent(1), ch = set.inputs.extent(3);
  out.inputs = TensorT<T>({int(rows.size()), side, side, ch});
  out.targets = TensorT<T>({int(rows.size()), 4});
  out.sizes.resize(rows.size());
  const std::size_t elems = std::size_t(side) * side * ch;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(set.inputs.data() + std::size_t(rows[i]) * elems, elems,
                out.inputs.data() + i * elems);
    for (int k = 0; k < 4; ++k) out.targets.at2(int(i), k) = set.targets.at2(rows[i], k);
    out.sizes[i] = set.sizes[std::size_t(rows[i])];
  }
  return out;
}

/// Seeded split; the validation rows are drawn by shuffling indices with a
/// stream independent of training-time randomness.
template <typename T>
std::pair<TrainSetT<T>, TrainSetT<T>> split_train_val(const TrainSetT<T>& full, double fraction,
                                                      std::uint64_t seed) {
  const int n = full.count();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = derive_stream(seed, "train.valsplit");
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[std::size_t(rng.uniform_int(i))]);

  int val_n = int(std::lround(fraction * n));
  val_n = std::min(val_n, n - 1);
  val_n = std::max(val_n, 0);
  std::vector<int> val_rows(order.begin(), order.begin() + val_n);
  std::vector<int> train_rows(order.begin() + val_n, order.end());
  return {subset_rows(full, train_rows), subset_rows(full, val_rows)};
}

struct TrainingArtifacts {
  TrainResult result;
  int train_count = 0;
  int val_count = 0;
};

inline void write_val_csv(const std::string& path, const std::vector<double>& val_loss) {
  std::string csv = "epoch,val_loss\n";
  char line[64];
  for (std::size_t e = 0; e < val_loss.size(); ++e) {
    std::snprintf(line, sizeof line, "%zu,%.17g\n", e, val_loss[e]);
    csv += line;
  }
  write_text_file(path, csv);
}

inline TrainingArtifacts run_training(const RunConfig& cfg, const std::string& dataset_path,
                                      const std::string& checkpoint_path,
                                      const std::string& loss_csv_path,
                                      const std::string& val_csv_path,
                                      std::FILE* progress = nullptr) {
  const auto samples = read_dataset(dataset_path);
  const TrainSet full = to_train_set(samples);
  auto [train_set, val_set] = split_train_val(full, cfg.val_fraction, cfg.seed);

  Network net(cfg.network);
  TrainingArtifacts art;
  art.train_count = train_set.count();
  art.val_count = val_set.count();
  art.result = train(net, train_set, cfg.train, val_set.count() ? &val_set : nullptr, progress);

  net.save(checkpoint_path);
  write_loss_csv(loss_csv_path, art.result.history);
  if (val_set.count()) write_val_csv(val_csv_path, art.result.val_loss);
  return art;
}

// ---------------------------------------------------------------------------
// Grid evaluation: sweep the (expansion s, iterations n) grid over a scene
// file, accumulating match labels per cell, then emit PR curves and a summary.

struct GridCellResult {
  double s = 0;
  int n = 1;
  double ap_envelope = 0;
  double ap_trapezoid = 0;
  long detections = 0;
  long gt_count = 0;
  long matched = 0;
  double mean_matched_iou = 0;
  std::vector<PRPoint> curve;
};

inline std::string grid_pr_filename(double s, int n) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "pr_s%g_n%d.csv", s, n);
  return buf;
}

template <typename R>
std::vector<GridCellResult> run_grid_with(R&& regress, const RunConfig& cfg,
                                          const std::string& scenes_path,
                                          const std::string& out_dir,
                                          std::FILE* progress = nullptr) {
  const auto& svals = cfg.s_values;
  const auto& nvals = cfg.n_values;
  const int n_max = *std::max_element(nvals.begin(), nvals.end());
  DetectOptions opt;
  opt.side = cfg.network.input_side;
  opt.pop_vs_original = cfg.pop_vs_original;

  std::vector<EvalAccumulator> acc(svals.size() * nvals.size());
  SceneReader reader(scenes_path);
  Scene scene;
  long scene_idx = 0;
  while (reader.next(scene)) {
    const auto proposals = propose_regions(scene, cfg.proposals);
    std::vector<BoundingBox> gts;
    for (const auto& o : scene.objects) gts.push_back(o.box);
    const double img_h = scene.image.extent(0), img_w = scene.image.extent(1);

    for (std::size_t si = 0; si < svals.size(); ++si) {
      const auto trajs =
          run_trajectories(regress, scene.image, proposals, svals[si], n_max, opt);
      for (std::size_t ni = 0; ni < nvals.size(); ++ni) {
        std::vector<Detection> dets;
        dets.reserve(trajs.size());
        for (const auto& t : trajs)
          dets.push_back(slice_trajectory(t, svals[si], nvals[ni], img_w, img_h));
        sort_by_pop(dets);
        acc[si * nvals.size() + ni].add_scene(dets, gts, cfg.eval_iou);
      }
    }
    ++scene_idx;
    if (progress && scene_idx % 20 == 0) {
      std::fprintf(progress, "grid scenes %ld/%llu\n", scene_idx,
                   (unsigned long long)reader.count());
      std::fflush(progress);
    }
  }

  std::vector<GridCellResult> cells;
  std::vector<ApSummaryRow> summary;
  for (std::size_t si = 0; si < svals.size(); ++si) {
    for (std::size_t ni = 0; ni < nvals.size(); ++ni) {
      const auto& a = acc[si * nvals.size() + ni];
      GridCellResult c;
      c.s = svals[si];
      c.n = nvals[ni];
      c.curve = pr_curve(a.labels, a.gt_count);
      c.ap_envelope = average_precision(c.curve, ApMethod::envelope);
      c.ap_trapezoid = average_precision(c.curve, ApMethod::trapezoid);
      c.detections = long(a.labels.size());
      c.gt_count = a.gt_count;
      double iou_sum = 0;
      for (const auto& l : a.labels)
        if (l.tp) {
          ++c.matched;
          iou_sum += l.matched_iou;
        }
      c.mean_matched_iou = c.matched ? iou_sum / double(c.matched) : 0;
      if (!out_dir.empty())
        write_pr_csv(out_dir + "/" + grid_pr_filename(c.s, c.n), c.curve);
      summary.push_back(
          {c.s, c.n, c.ap_envelope, c.ap_trapezoid, c.detections, c.gt_count});
      cells.push_back(std::move(c));
    }
  }
  if (!out_dir.empty()) write_ap_summary_csv(out_dir + "/ap_summary.csv", summary);
  return cells;
}

inline std::vector<GridCellResult> run_grid(const RunConfig& cfg, Network& net,
                                            const std::string& scenes_path,
                                            const std::string& out_dir,
                                            std::FILE* progress = nullptr) {
  NetworkRegressor regress(net);
  return run_grid_with(regress, cfg, scenes_path, out_dir, progress);
}

/// Before/after comparison over the matched proposal pool: every proposal
/// overlapping some ground truth at or above the threshold forms one pair
/// with its best-overlap object, and the same pairs are scored again after a
/// single refinement step, so the two means differ only by the regressor.
struct RefinementContrast {
  long pairs = 0;
  long gt_count = 0;
  double raw_mean = 0;
  double refined_mean = 0;
};

template <typename R>
RefinementContrast refinement_contrast(R&& regress, const std::string& scenes_path,
                                       const MstParams& params, double s,
                                       double iou_threshold, const DetectOptions& opt = {}) {
  RefinementContrast out;
  double raw_sum = 0, refined_sum = 0;
  SceneReader reader(scenes_path);
  Scene scene;
  while (reader.next(scene)) {
    out.gt_count += long(scene.objects.size());
    const auto proposals = propose_regions(scene, params);
    std::vector<BoundingBox> matched, gts;
    for (const auto& p : proposals) {
      double best = 0;
      const BoundingBox* gt = nullptr;
      for (const auto& o : scene.objects) {
        const double v = iou(p, o.box);
        if (v > best) {
          best = v;
          gt = &o.box;
        }
      }
      if (best >= iou_threshold) {
        matched.push_back(p);
        gts.push_back(*gt);
        raw_sum += best;
      }
    }
    if (matched.empty()) continue;
    const auto trajs = run_trajectories(regress, scene.image, matched, s, 1, opt);
    const int w = scene.image.extent(1), h = scene.image.extent(0);
    for (std::size_t i = 0; i < trajs.size(); ++i)
      refined_sum += iou(slice_trajectory(trajs[i], s, 1, w, h).final_box, gts[i]);
    out.pairs += long(matched.size());
  }
  if (out.pairs) {
    out.raw_mean = raw_sum / double(out.pairs);
    out.refined_mean = refined_sum / double(out.pairs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Variant comparison: identical data, identical validation split, per-row
// training seed; reports the per-epoch validation losses of every run.

struct CompareRow {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<double> val_loss;
  double final_val = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double median_final_val(const std::vector<CompareRow>& rows, const std::string& variant) {
  std::vector<double> finals;
  for (const auto& r : rows)
    if (r.variant == variant) finals.push_back(r.final_val);
  return median(finals);
}

inline std::vector<CompareRow> run_compare(const RunConfig& cfg, const std::string& dataset_path,
                                           const std::string& csv_path,
                                           std::FILE* progress = nullptr) {
  if (cfg.val_fraction <= 0)
    throw ConfigError("compare needs train.val_fraction > 0");
  const auto samples = read_dataset(dataset_path);
  const TrainSet full = to_train_set(samples);
  auto [train_set, val_set] = split_train_val(full, cfg.val_fraction, cfg.seed);

  std::vector<CompareRow> rows;
  for (const auto& variant : cfg.compare_variants) {
    for (std::uint64_t seed : cfg.compare_seeds) {
      NetworkSpec spec = cfg.network;
      apply_variant(spec, variant);
      spec.seed = seed;
      TrainConfig tcfg = cfg.train;
      tcfg.seed = seed;

      if (progress) {
        std::fprintf(progress, "compare %s seed %llu\n", variant.c_str(),
                     (unsigned long long)seed);
        std::fflush(progress);
      }
      Network net(spec);
      const auto result = train(net, train_set, tcfg, &val_set, progress);
      rows.push_back({variant, seed, result.val_loss, result.val_loss.back()});
    }
  }

  if (!csv_path.empty()) {
    std::string csv = "variant,seed,epoch,val_loss\n";
    char line[128];
    for (const auto& r : rows)
      for (std::size_t e = 0; e < r.val_loss.size(); ++e) {
        std::snprintf(line, sizeof line, "%s,%llu,%zu,%.17g\n", r.variant.c_str(),
                      (unsigned long long)r.seed, e, r.val_loss[e]);
        csv += line;
      }
    write_text_file(csv_path, csv);
  }
  return rows;
}

}  // namespace rebox
