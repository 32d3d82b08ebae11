#pragma once

#include <vector>

#include "radarloop/keyframing.hpp"

namespace radarloop {

struct LoopLabel {
  int query_id = -1;
  int candidate_id = -1;
  bool is_true = false;
  double gt_distance = 0.0;      // m between the ground-truth sensor poses
  double heading_diff_deg = 0.0; // in [0, 180]
};

struct LoopLabelConfig {
  double distance_threshold = 6.0;  // m
  double heading_split_deg = 90.0;  // same- vs opposite-direction boundary
  int recency_exclusion = 20;       // keyframes, matching retrieval
};

// Pairwise labels for every (query, earlier candidate) keyframe pair outside
// the recency exclusion. Ground truth is indexed by the keyframes'
// scan_index.
std::vector<LoopLabel> label_ground_truth_loops(const Trajectory& gt,
                                                const std::vector<Keyframe>& frames,
                                                const LoopLabelConfig& cfg);

inline bool same_direction(const LoopLabel& l, const LoopLabelConfig& cfg) {
  return l.heading_diff_deg <= cfg.heading_split_deg;
}

// Fraction of query points with a candidate point within radius once the
// query cloud is moved by query_to_candidate. Empty clouds give 0.
double overlap_ratio(const PointCloud& query, const PointCloud& candidate,
                     const Se3Pose& query_to_candidate, double radius);
double symmetric_overlap_ratio(const PointCloud& query, const PointCloud& candidate,
                               const Se3Pose& query_to_candidate, double radius);

struct CurvePoint {
  double threshold = 0.0;  // predict positive when score >= threshold
  long tp = 0, fp = 0, tn = 0, fn = 0;

  double tpr() const { return tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0; }
  double fpr() const { return fp + tn ? static_cast<double>(fp) / (fp + tn) : 0.0; }
  double precision() const { return tp + fp ? static_cast<double>(tp) / (tp + fp) : 1.0; }
  double recall() const { return tpr(); }
};

struct RocResult {
  std::vector<CurvePoint> points;
  double auroc = 0.0;
};

// Threshold sweep over the unique scores; AUROC by exact integer trapezoid,
// equal to exhaustive pair counting with ties at half weight. Both classes
// must be present.
RocResult roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);
std::vector<CurvePoint> pr_curve(const std::vector<double>& scores,
                                 const std::vector<int>& labels);

double max_f1(const std::vector<CurvePoint>& curve);
// Highest recall among points with precision exactly 1; 0 if none.
double recall_at_full_precision(const std::vector<CurvePoint>& curve);

struct KittiMetrics {
  double t_rel_percent = 0.0;
  double r_rel_deg_per_100m = 0.0;
  int sample_count = 0;
};

std::vector<double> default_kitti_lengths();  // {20, 40, ..., 160} m

// Relative-pose drift over fixed-length subsequences, averaged over every
// start index, in percent and deg per 100 m.
KittiMetrics kitti_metrics(const Trajectory& est, const Trajectory& gt,
                           const std::vector<double>& lengths = default_kitti_lengths());

struct AteResult {
  double aligned_rmse = 0.0;    // after closed-form rigid alignment
  double unaligned_rmse = 0.0;
  Se3Pose alignment;            // maps est positions onto gt
  int matched_poses = 0;
};

// Poses paired by identical timestamp; at least three pairs required.
AteResult ate(const Trajectory& est, const Trajectory& gt);

}  // namespace radarloop
