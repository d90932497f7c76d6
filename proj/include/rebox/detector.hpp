#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "rebox/data.hpp"
#include "rebox/geometry.hpp"
#include "rebox/network.hpp"

namespace rebox {

struct Detection {
  BoundingBox proposal;            // as proposed, before any augmentation
  std::vector<BoundingBox> trace;  // predicted box after each iteration, length n
  BoundingBox final_box;
  double pop = 0;
  double s = 0;
  int n = 1;
};

struct DetectOptions {
  int side = 64;
  /// Eq. 4 reference box: false (default) scores consistency against the
  /// augmented input of the final iteration; true against the original
  /// proposal.
  bool pop_vs_original = false;
};

/// Adapts a trained network to the regressor callable the detector drives.
/// Always runs in test mode.
class NetworkRegressor {
 public:
  explicit NetworkRegressor(Network& net) : net_(&net) {}

  Tensor operator()(const Tensor& patches, const std::vector<std::array<double, 2>>& sizes) {
    return net_->forward(patches, net_->spec().use_size_input ? &sizes : nullptr, false,
                         nullptr);
  }

 private:
  Network* net_;
};

/// Full iteration history for each proposal of one scene, run in lockstep so
/// every iteration is one batched regressor call. The trace for n iterations
/// is a prefix of the trace for more, so one pass at n_max serves a whole
/// column of the parameter grid.
struct Trajectory {
  BoundingBox proposal;
  std::vector<BoundingBox> boxes;  // raw prediction per iteration
  std::vector<double> pops;        // consistency score per iteration
  int terminal = -1;               // iteration whose prediction left the image, -1 if none
};

template <typename R>
std::vector<Trajectory> run_trajectories(R&& regress, const Tensor& image,
                                         const std::vector<BoundingBox>& proposals, double s,
                                         int n_max, const DetectOptions& opt) {
  const double img_h = image.extent(0), img_w = image.extent(1);
  const int ch = image.extent(2);
  std::vector<Trajectory> trajs(proposals.size());
  std::vector<BoundingBox> cur(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    trajs[i].proposal = proposals[i];
    cur[i] = proposals[i];
  }

  for (int iter = 0; iter < n_max; ++iter) {
    std::vector<std::size_t> alive;
    for (std::size_t i = 0; i < trajs.size(); ++i)
      if (trajs[i].terminal < 0) alive.push_back(i);
    if (alive.empty()) break;

    std::vector<BoundingBox> augs(alive.size());
    Tensor patches({int(alive.size()), opt.side, opt.side, ch});
    std::vector<std::array<double, 2>> sizes(alive.size());
    const std::size_t patch_elems = std::size_t(opt.side) * opt.side * ch;
    for (std::size_t k = 0; k < alive.size(); ++k) {
      augs[k] = augment_box(cur[alive[k]], s, img_w, img_h);
      Tensor patch = warp_region(image, augs[k], opt.side);
      std::copy_n(patch.data(), patch_elems, patches.data() + k * patch_elems);
      sizes[k] = {augs[k].width(), augs[k].height()};
    }

    const Tensor out = regress(patches, sizes);
    for (std::size_t k = 0; k < alive.size(); ++k) {
      auto& t = trajs[alive[k]];
      const NormalizedBox nb{double(out.at2(int(k), 0)), double(out.at2(int(k), 1)),
                             double(out.at2(int(k), 2)), double(out.at2(int(k), 3))};
      BoundingBox pred;
      double pop;
      try {
        pred = denormalize_box(nb, augs[k]);
        pop = pop_score(opt.pop_vs_original ? t.proposal : augs[k], pred);
      } catch (const DegeneratePredictionError&) {
        pred = augs[k];  // held in place
        pop = 0;
      }
      t.boxes.push_back(pred);
      t.pops.push_back(pop);
      try {
        cur[alive[k]] = clip_box(pred, img_w, img_h);
      } catch (const InvalidBoxError&) {
        t.terminal = iter;  // prediction left the image; box held, score zeroed
        t.pops.back() = 0;
      }
    }
  }
  return trajs;
}

/// Detection for exactly n iterations, cut from a trajectory of length >= n.
inline Detection slice_trajectory(const Trajectory& t, double s, int n, double img_w,
                                  double img_h) {
  Detection d;
  d.proposal = t.proposal;
  d.s = s;
  d.n = n;
  const int usable = t.terminal >= 0 ? std::min(n, t.terminal + 1) : n;
  for (int i = 0; i < usable; ++i) d.trace.push_back(t.boxes[std::size_t(i)]);
  while (int(d.trace.size()) < n) d.trace.push_back(d.trace.back());
  if (t.terminal >= 0 && t.terminal < n) {
    d.final_box = d.trace.back();
    d.pop = 0;
  } else {
    d.final_box = clip_box(d.trace.back(), img_w, img_h);
    d.pop = t.pops[std::size_t(n - 1)];
  }
  return d;
}

inline void sort_by_pop(std::vector<Detection>& dets) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.pop > b.pop; });
}

template <typename R>
std::vector<Detection> detect_scene(R&& regress, const Tensor& image,
                                    const std::vector<BoundingBox>& proposals, double s, int n,
                                    const DetectOptions& opt) {
  const auto trajs = run_trajectories(regress, image, proposals, s, n, opt);
  std::vector<Detection> dets;
  dets.reserve(trajs.size());
  for (const auto& t : trajs)
    dets.push_back(slice_trajectory(t, s, n, image.extent(1), image.extent(0)));
  sort_by_pop(dets);
  return dets;
}

/// One augment-and-regress step.
template <typename R>
Detection regress_once(R&& regress, const Tensor& image, const BoundingBox& box, double s,
                       const DetectOptions& opt) {
  return detect_scene(regress, image, {box}, s, 1, opt)[0];
}

template <typename R>
Detection regress_iterative(R&& regress, const Tensor& image, const BoundingBox& box, double s,
                            int n, const DetectOptions& opt) {
  return detect_scene(regress, image, {box}, s, n, opt)[0];
}

inline const std::vector<double>& default_s_values() {
  static const std::vector<double> v{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  return v;
}

inline const std::vector<int>& default_n_values() {
  static const std::vector<int> v{1, 2, 3, 4, 5};
  return v;
}

inline std::string detections_csv_header() {
  return "scene,s,n,prop_x1,prop_y1,prop_x2,prop_y2,x1,y1,x2,y2,pop\n";
}

inline void append_detections_csv(std::string& csv, int scene_id,
                                  const std::vector<Detection>& dets) {
  char line[320];
  for (const auto& d : dets) {
    std::snprintf(line, sizeof line, "%d,%.3g,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.9f\n",
                  scene_id, d.s, d.n, d.proposal.x1, d.proposal.y1, d.proposal.x2, d.proposal.y2,
                  d.final_box.x1, d.final_box.y1, d.final_box.x2, d.final_box.y2, d.pop);
    csv += line;
  }
}

}  // namespace rebox
