#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "rebox/detector.hpp"
#include "rebox/geometry.hpp"

namespace rebox {

struct DetectionLabel {
  double pop = 0;
  bool tp = false;
  double matched_iou = 0;  // IoU with the matched ground truth when tp
};

/// Greedy score-order matching: each ground truth claims at most one
/// detection. Equal-PoP ties go to the detection with the larger best-IoU,
/// then input order.
inline std::vector<DetectionLabel> match_detections(const std::vector<Detection>& dets,
                                                    const std::vector<BoundingBox>& gts,
                                                    double iou_threshold = 0.5) {
  std::vector<double> best_iou(dets.size(), 0);
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (const auto& g : gts) best_iou[i] = std::max(best_iou[i], iou(dets[i].final_box, g));

  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].pop != dets[b].pop) return dets[a].pop > dets[b].pop;
    return best_iou[a] > best_iou[b];
  });

  std::vector<DetectionLabel> labels(dets.size());
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t i : order) {
    labels[i].pop = dets[i].pop;
    double best = 0;
    int best_g = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(dets[i].final_box, gts[g]);
      if (v > best) {
        best = v;
        best_g = int(g);
      }
    }
    if (best_g >= 0 && best >= iou_threshold) {
      taken[std::size_t(best_g)] = true;
      labels[i].tp = true;
      labels[i].matched_iou = best;
    }
  }
  return labels;
}

struct PRPoint {
  double threshold = 1;
  double precision = 1;
  double recall = 0;
  long tp = 0, fp = 0, fn = 0;
};

/// One point per distinct PoP value, swept from the highest score downwards.
inline std::vector<PRPoint> pr_curve(std::vector<DetectionLabel> labels, long gt_count) {
  std::stable_sort(labels.begin(), labels.end(),
                   [](const DetectionLabel& a, const DetectionLabel& b) { return a.pop > b.pop; });
  std::vector<PRPoint> curve;
  if (labels.empty()) {
    curve.push_back({1.0, 1.0, 0.0, 0, 0, gt_count});
    return curve;
  }
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < labels.size()) {
    const double thr = labels[i].pop;
    for (; i < labels.size() && labels[i].pop == thr; ++i)
      (labels[i].tp ? tp : fp) += 1;
    PRPoint p;
    p.threshold = thr;
    p.tp = tp;
    p.fp = fp;
    p.fn = gt_count - tp;
    p.precision = (tp + fp) ? double(tp) / double(tp + fp) : 1.0;
    p.recall = gt_count ? double(tp) / double(gt_count) : 0.0;
    curve.push_back(p);
  }
  return curve;
}

enum class ApMethod { envelope, trapezoid };

/// Area under the PR curve. The envelope method integrates the running
/// maximum of precision over recall (the usual detection convention); the
/// trapezoid method integrates the raw curve.
inline double average_precision(const std::vector<PRPoint>& curve,
                                ApMethod method = ApMethod::envelope) {
  if (curve.empty()) return 0;
  if (method == ApMethod::envelope) {
    double ap = 0, prev_recall = 0, env = 0;
    std::vector<double> env_at(curve.size());
    for (std::size_t i = curve.size(); i-- > 0;) {
      env = std::max(env, curve[i].precision);
      env_at[i] = env;
    }
    for (std::size_t i = 0; i < curve.size(); ++i) {
      ap += (curve[i].recall - prev_recall) * env_at[i];
      prev_recall = curve[i].recall;
    }
    return ap;
  }
  double ap = 0, prev_recall = 0, prev_precision = curve.front().precision;
  for (const auto& p : curve) {
    ap += (p.recall - prev_recall) * (p.precision + prev_precision) / 2;
    prev_recall = p.recall;
    prev_precision = p.precision;
  }
  return ap;
}

/// Table II accounting: how many ground truths are covered by at least one
/// proposal at the IoU threshold.
struct RecallResult {
  long matches = 0;
  long gt_count = 0;
  double recall = 0;
};

inline RecallResult proposal_recall(const std::vector<BoundingBox>& proposals,
                                    const std::vector<BoundingBox>& gts,
                                    double iou_threshold = 0.5) {
  RecallResult r;
  r.gt_count = long(gts.size());
  for (const auto& g : gts) {
    for (const auto& p : proposals) {
      if (iou(p, g) >= iou_threshold) {
        ++r.matches;
        break;
      }
    }
  }
  r.recall = r.gt_count ? double(r.matches) / double(r.gt_count) : 0.0;
  return r;
}

/// Pools per-scene match labels for one (s, n) cell so the PR sweep runs on a
/// single global threshold.
struct EvalAccumulator {
  std::vector<DetectionLabel> labels;
  long gt_count = 0;

  void add_scene(const std::vector<Detection>& dets, const std::vector<BoundingBox>& gts,
                 double iou_threshold = 0.5) {
    auto scene_labels = match_detections(dets, gts, iou_threshold);
    labels.insert(labels.end(), scene_labels.begin(), scene_labels.end());
    gt_count += long(gts.size());
  }
};

inline void write_pr_csv(const std::string& path, const std::vector<PRPoint>& curve) {
  std::string csv = "threshold,precision,recall,tp,fp,fn\n";
  char line[160];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof line, "%.9f,%.9f,%.9f,%ld,%ld,%ld\n", p.threshold, p.precision,
                  p.recall, p.tp, p.fp, p.fn);
    csv += line;
  }
  write_text_file(path, csv);
}

struct ApSummaryRow {
  double s = 0;
  int n = 1;
  double ap_envelope = 0;
  double ap_trapezoid = 0;
  long detections = 0;
  long gt_count = 0;
};

inline void write_ap_summary_csv(const std::string& path,
                                 const std::vector<ApSummaryRow>& rows) {
  std::string csv = "s,n,ap_envelope,ap_trapezoid,detections,gt_count\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%.2f,%d,%.9f,%.9f,%ld,%ld\n", r.s, r.n, r.ap_envelope,
                  r.ap_trapezoid, r.detections, r.gt_count);
    csv += line;
  }
  write_text_file(path, csv);
}

}  // namespace rebox
