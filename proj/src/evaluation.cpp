#include "radarloop/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "radarloop/errors.hpp"

namespace radarloop {

std::vector<LoopLabel> label_ground_truth_loops(const Trajectory& gt,
                                                const std::vector<Keyframe>& frames,
                                                const LoopLabelConfig& cfg) {
  std::vector<LoopLabel> labels;
  for (std::size_t qi = 0; qi < frames.size(); ++qi) {
    const Keyframe& q = frames[qi];
    if (q.scan_index < 0 || q.scan_index >= static_cast<int>(gt.poses.size()))
      throw DataError("keyframe has no ground-truth pose");
    const Se3Pose& gq = gt.poses[q.scan_index].pose;
    for (std::size_t ci = 0; ci < qi; ++ci) {
      const Keyframe& c = frames[ci];
      if (q.id - c.id <= cfg.recency_exclusion) continue;
      if (c.scan_index < 0 || c.scan_index >= static_cast<int>(gt.poses.size()))
        throw DataError("keyframe has no ground-truth pose");
      const Se3Pose& gc = gt.poses[c.scan_index].pose;
      LoopLabel l;
      l.query_id = q.id;
      l.candidate_id = c.id;
      l.gt_distance = (gq.translation - gc.translation).norm();
      l.is_true = l.gt_distance <= cfg.distance_threshold;
      double dh = std::abs(yaw_of(gq.rotation) - yaw_of(gc.rotation));
      dh = std::fmod(dh, 2.0 * M_PI);
      if (dh > M_PI) dh = 2.0 * M_PI - dh;
      l.heading_diff_deg = dh * 180.0 / M_PI;
      labels.push_back(l);
    }
  }
  return labels;
}

double overlap_ratio(const PointCloud& query, const PointCloud& candidate,
                     const Se3Pose& query_to_candidate, double radius) {
  if (query.empty() || candidate.empty()) return 0.0;
  const std::vector<Vec3> cand_pts = positions_of(candidate);
  SpatialGrid grid(&cand_pts, radius);
  int hits = 0;
  for (const auto& p : query)
    if (grid.has_neighbor_within(query_to_candidate.apply(p.position), radius)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(query.size());
}

double symmetric_overlap_ratio(const PointCloud& query, const PointCloud& candidate,
                               const Se3Pose& query_to_candidate, double radius) {
  return 0.5 * (overlap_ratio(query, candidate, query_to_candidate, radius) +
                overlap_ratio(candidate, query, query_to_candidate.inverse(), radius));
}

namespace {

struct SweepResult {
  std::vector<CurvePoint> points;  // one per unique score, descending
  long positives = 0;
  long negatives = 0;
  long long area2 = 0;  // 2 * auroc * P * N
};

SweepResult sweep_thresholds(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  if (scores.empty()) throw UndefinedMetricError("no samples to sweep");
  for (double s : scores)
    if (!std::isfinite(s)) throw DataError("scores must be finite");

  SweepResult out;
  for (int l : labels) (l ? out.positives : out.negatives)++;
  if (out.positives == 0 || out.negatives == 0)
    throw UndefinedMetricError("both classes are required");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double value = scores[order[i]];
    long group_pos = 0, group_neg = 0;
    while (i < order.size() && scores[order[i]] == value) {
      (labels[order[i]] ? group_pos : group_neg)++;
      ++i;
    }
    out.area2 += group_neg * (2 * tp + group_pos);
    tp += group_pos;
    fp += group_neg;
    CurvePoint pt;
    pt.threshold = value;
    pt.tp = tp;
    pt.fp = fp;
    pt.fn = out.positives - tp;
    pt.tn = out.negatives - fp;
    out.points.push_back(pt);
  }
  return out;
}

}  // namespace

RocResult roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  SweepResult sweep = sweep_thresholds(scores, labels);
  RocResult out;
  CurvePoint origin;
  origin.threshold = std::numeric_limits<double>::infinity();
  origin.tp = 0;
  origin.fp = 0;
  origin.fn = sweep.positives;
  origin.tn = sweep.negatives;
  out.points.push_back(origin);
  out.points.insert(out.points.end(), sweep.points.begin(), sweep.points.end());
  out.auroc = static_cast<double>(sweep.area2) /
              (2.0 * static_cast<double>(sweep.positives) *
               static_cast<double>(sweep.negatives));
  return out;
}

std::vector<CurvePoint> pr_curve(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  return sweep_thresholds(scores, labels).points;
}

double max_f1(const std::vector<CurvePoint>& curve) {
  double best = 0.0;
  for (const auto& pt : curve) {
    const double p = pt.precision();
    const double r = pt.recall();
    if (p + r > 0.0) best = std::max(best, 2.0 * p * r / (p + r));
  }
  return best;
}

double recall_at_full_precision(const std::vector<CurvePoint>& curve) {
  double best = 0.0;
  for (const auto& pt : curve)
    if (pt.fp == 0 && pt.tp > 0) best = std::max(best, pt.recall());
  return best;
}

std::vector<double> default_kitti_lengths() {
  return {20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 160.0};
}

KittiMetrics kitti_metrics(const Trajectory& est, const Trajectory& gt,
                           const std::vector<double>& lengths) {
  if (est.poses.size() != gt.poses.size())
    throw DataError("trajectories differ in length");
  const std::size_t n = gt.poses.size();
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(est.poses[i].timestamp - gt.poses[i].timestamp) > 1e-6)
      throw DataError("trajectory timestamps do not match");

  std::vector<double> cum(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    cum[i] = cum[i - 1] +
             (gt.poses[i].pose.translation - gt.poses[i - 1].pose.translation).norm();

  std::vector<double> sorted_lengths = lengths;
  std::sort(sorted_lengths.begin(), sorted_lengths.end());

  double t_sum = 0.0, r_sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i;
    for (double len : sorted_lengths) {
      while (j < n && cum[j] - cum[i] < len) ++j;
      if (j >= n) break;
      const Se3Pose rel_gt = gt.poses[i].pose.inverse() * gt.poses[j].pose;
      const Se3Pose rel_est = est.poses[i].pose.inverse() * est.poses[j].pose;
      const Se3Pose err = rel_gt.inverse() * rel_est;
      t_sum += err.translation.norm() / len;
      r_sum += err.rotation_angle() / len;
      ++count;
    }
  }
  if (count == 0)
    throw UndefinedMetricError("trajectory shorter than the smallest segment length");
  KittiMetrics out;
  out.t_rel_percent = 100.0 * t_sum / count;
  out.r_rel_deg_per_100m = (r_sum / count) * (180.0 / M_PI) * 100.0;
  out.sample_count = count;
  return out;
}

AteResult ate(const Trajectory& est, const Trajectory& gt) {
  std::map<double, std::size_t> gt_by_time;
  for (std::size_t i = 0; i < gt.poses.size(); ++i) gt_by_time[gt.poses[i].timestamp] = i;

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < est.poses.size(); ++i) {
    auto it = gt_by_time.find(est.poses[i].timestamp);
    if (it != gt_by_time.end()) pairs.emplace_back(i, it->second);
  }
  if (pairs.size() < 3)
    throw UndefinedMetricError("rigid alignment needs at least three matched poses");

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    src.col(k) = est.poses[pairs[static_cast<std::size_t>(k)].first].pose.translation;
    dst.col(k) = gt.poses[pairs[static_cast<std::size_t>(k)].second].pose.translation;
  }

  const Eigen::Matrix4d T = Eigen::umeyama(src, dst, false);
  AteResult out;
  out.alignment.rotation = Quat(Mat3(T.topLeftCorner<3, 3>()));
  out.alignment.translation = T.topRightCorner<3, 1>();
  out.matched_poses = static_cast<int>(pairs.size());

  double aligned = 0.0, unaligned = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    aligned += (out.alignment.apply(src.col(k)) - Vec3(dst.col(k))).squaredNorm();
    unaligned += (src.col(k) - dst.col(k)).squaredNorm();
  }
  out.aligned_rmse = std::sqrt(aligned / static_cast<double>(n));
  out.unaligned_rmse = std::sqrt(unaligned / static_cast<double>(n));
  return out;
}

}  // namespace radarloop
