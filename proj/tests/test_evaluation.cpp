#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "radarloop/errors.hpp"
#include "radarloop/evaluation.hpp"
#include "radarloop/rng.hpp"

using namespace radarloop;

namespace {

Keyframe kf(int id, int scan_index) {
  Keyframe f;
  f.id = id;
  f.scan_index = scan_index;
  return f;
}

TimedPose tp(double t, double x, double y, double yaw = 0.0) {
  TimedPose p;
  p.timestamp = t;
  p.pose.translation = Vec3(x, y, 0.0);
  p.pose.rotation = yaw_quat(yaw);
  return p;
}

PointCloud grid_cloud(double x0, double x1, double step) {
  PointCloud cloud;
  for (double x = x0; x <= x1 + 1e-9; x += step)
    for (double y = 0.0; y <= 4.0 + 1e-9; y += step) {
      RadarPoint p;
      p.position = Vec3(x, y, 0.0);
      p.intensity = 1.0;
      cloud.push_back(p);
    }
  return cloud;
}

// Exhaustive pair counting: ties count half.
double pair_count_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / pairs;
}

Trajectory straight_line(int n, double spacing, double scale = 1.0, double yaw_per_m = 0.0) {
  Trajectory traj;
  for (int i = 0; i < n; ++i) {
    const double s = spacing * i;
    traj.push_back(static_cast<double>(i), [&] {
      Se3Pose p;
      p.translation = Vec3(scale * s, 0.0, 0.0);
      p.rotation = yaw_quat(yaw_per_m * s);
      return p;
    }());
  }
  return traj;
}

}  // namespace

TEST_CASE("the six-meter rule splits pairs at the threshold") {
  Trajectory gt;
  gt.push_back(0.0, tp(0.0, 0.0, 0.0).pose);
  gt.push_back(1.0, tp(1.0, 6.1, 0.0).pose);
  gt.push_back(2.0, tp(2.0, 0.2, 5.9, M_PI).pose);
  gt.push_back(3.0, tp(3.0, 0.0, 0.0).pose);

  std::vector<Keyframe> frames{kf(0, 0), kf(1, 1), kf(40, 2), kf(45, 3)};
  LoopLabelConfig cfg;
  auto labels = label_ground_truth_loops(gt, frames, cfg);

  REQUIRE(labels.size() == 4);  // (40,0) (40,1) (45,0) (45,1); 45 vs 40 is too recent
  auto find = [&](int q, int c) -> const LoopLabel& {
    for (const auto& l : labels)
      if (l.query_id == q && l.candidate_id == c) return l;
    throw std::runtime_error("label not found");
  };
  CHECK(find(40, 0).gt_distance == doctest::Approx(std::hypot(0.2, 5.9)));
  CHECK(find(40, 0).is_true);
  CHECK(find(40, 1).gt_distance == doctest::Approx(std::hypot(5.9, 5.9)));
  CHECK_FALSE(find(40, 1).is_true);
  CHECK(find(45, 1).gt_distance == doctest::Approx(6.1));
  CHECK_FALSE(find(45, 1).is_true);
  CHECK(find(45, 0).gt_distance == 0.0);
  CHECK(find(45, 0).is_true);
  CHECK(find(40, 0).heading_diff_deg == doctest::Approx(180.0));
  CHECK(find(45, 0).heading_diff_deg == doctest::Approx(0.0));
  CHECK(same_direction(find(45, 0), cfg));
  CHECK_FALSE(same_direction(find(40, 0), cfg));
}

TEST_CASE("keyframes inside the recency exclusion are not labeled") {
  Trajectory gt;
  for (int i = 0; i < 3; ++i) gt.push_back(i, tp(i, i, 0.0).pose);
  std::vector<Keyframe> frames{kf(0, 0), kf(10, 1), kf(20, 2)};
  auto labels = label_ground_truth_loops(gt, frames, LoopLabelConfig{});
  CHECK(labels.empty());
}

TEST_CASE("identical clouds overlap fully and distant clouds not at all") {
  PointCloud a = grid_cloud(0.0, 10.0, 0.5);
  CHECK(overlap_ratio(a, a, Se3Pose::identity(), 1.0) == doctest::Approx(1.0));
  Se3Pose far;
  far.translation = Vec3(100.0, 0.0, 0.0);
  CHECK(overlap_ratio(a, a, far, 1.0) == 0.0);
  CHECK(overlap_ratio({}, a, Se3Pose::identity(), 1.0) == 0.0);
  CHECK(overlap_ratio(a, {}, Se3Pose::identity(), 1.0) == 0.0);
}

TEST_CASE("a half-overlapping split yields roughly one half") {
  PointCloud query = grid_cloud(0.0, 20.0, 0.5);
  PointCloud candidate = grid_cloud(10.5, 30.0, 0.5);
  const double r = overlap_ratio(query, candidate, Se3Pose::identity(), 0.75);
  CHECK(r == doctest::Approx(0.5).epsilon(0.08));
  const double sym = symmetric_overlap_ratio(query, candidate, Se3Pose::identity(), 0.75);
  const double fwd = overlap_ratio(query, candidate, Se3Pose::identity(), 0.75);
  const double rev = overlap_ratio(candidate, query, Se3Pose::identity().inverse(), 0.75);
  CHECK(sym == doctest::Approx(0.5 * (fwd + rev)));
}

TEST_CASE("perfectly separated scores reach full AUROC and full-precision recall") {
  std::vector<double> scores{0.9, 0.8, 0.7, 0.2, 0.1};
  std::vector<int> labels{1, 1, 1, 0, 0};
  auto roc = roc_curve(scores, labels);
  CHECK(roc.auroc == 1.0);
  auto pr = pr_curve(scores, labels);
  CHECK(recall_at_full_precision(pr) == 1.0);
  CHECK(max_f1(pr) == 1.0);
  for (const auto& pt : pr) CHECK(pt.tp + pt.fp + pt.tn + pt.fn == 5);
}

TEST_CASE("the three-point hand case gives one half") {
  std::vector<double> scores{0.9, 0.6, 0.1};
  std::vector<int> labels{1, 0, 1};
  auto roc = roc_curve(scores, labels);
  CHECK(roc.auroc == 0.5);
}

TEST_CASE("random labels give chance-level AUROC") {
  Rng rng(51);
  const int n = 2000;
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    scores[i] = rng.uniform01();
    labels[i] = rng.uniform01() < 0.5 ? 1 : 0;
  }
  auto roc = roc_curve(scores, labels);
  CHECK(roc.auroc == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(roc.auroc - 0.5) < 0.05);
}

TEST_CASE("AUROC equals exhaustive pair counting including ties") {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 20 + static_cast<int>(rng.uniform_index(180));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.uniform_index(12));  // force ties
      labels[i] = rng.uniform01() < 0.4 ? 1 : 0;
      (labels[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) {
      labels[0] = 0;
      labels[1] = 1;
    }
    auto roc = roc_curve(scores, labels);
    CHECK(roc.auroc == doctest::Approx(pair_count_auroc(scores, labels)).epsilon(1e-14));
  }
}

TEST_CASE("AUROC is invariant under strictly monotone score transforms") {
  Rng rng(53);
  const int n = 150;
  std::vector<double> scores(n), warped(n);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    scores[i] = rng.uniform(-3.0, 3.0);
    warped[i] = std::exp(scores[i]);
    labels[i] = rng.uniform01() < (1.0 / (1.0 + std::exp(-scores[i]))) ? 1 : 0;
  }
  labels[0] = 0;
  labels[1] = 1;
  CHECK(roc_curve(scores, labels).auroc == roc_curve(warped, labels).auroc);
}

TEST_CASE("single-class inputs are rejected") {
  std::vector<double> scores{0.4, 0.6};
  CHECK_THROWS_AS(roc_curve(scores, std::vector<int>{1, 1}), UndefinedMetricError);
  CHECK_THROWS_AS(pr_curve(scores, std::vector<int>{0, 0}), UndefinedMetricError);
}

TEST_CASE("drift metrics vanish when the estimate equals the ground truth") {
  auto gt = straight_line(200, 1.0);
  auto m = kitti_metrics(gt, gt);
  CHECK(m.t_rel_percent == doctest::Approx(0.0));
  CHECK(m.r_rel_deg_per_100m == doctest::Approx(0.0));
  CHECK(m.sample_count > 0);
}

TEST_CASE("a one percent scale inflation reads as one percent drift") {
  auto gt = straight_line(200, 1.0);
  auto est = straight_line(200, 1.0, 1.01);
  auto m = kitti_metrics(est, gt);
  CHECK(m.t_rel_percent == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("pure yaw drift of a tenth of a degree per meter reads as ten per hundred") {
  auto gt = straight_line(200, 1.0);
  auto est = straight_line(200, 1.0, 1.0, 0.1 * M_PI / 180.0);
  auto m = kitti_metrics(est, gt);
  CHECK(m.r_rel_deg_per_100m == doctest::Approx(10.0).epsilon(0.02));
}

TEST_CASE("trajectories shorter than the smallest segment are rejected") {
  auto gt = straight_line(10, 1.0);
  CHECK_THROWS_AS(kitti_metrics(gt, gt), UndefinedMetricError);
}

TEST_CASE("ATE vanishes for identical trajectories and rigid offsets") {
  auto gt = straight_line(100, 0.8, 1.0, 0.01);
  auto r = ate(gt, gt);
  CHECK(r.aligned_rmse == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.unaligned_rmse == doctest::Approx(0.0).epsilon(1e-12));

  Se3Pose g;
  g.translation = Vec3(14.0, -3.0, 2.0);
  g.rotation = Quat(Eigen::AngleAxisd(1.1, Vec3(0.3, 0.5, 0.81).normalized()));
  Trajectory moved;
  for (const auto& p : gt.poses) moved.push_back(p.timestamp, g * p.pose);
  auto r2 = ate(moved, gt);
  CHECK(r2.aligned_rmse < 1e-9);
  CHECK(r2.unaligned_rmse > 1.0);
}

TEST_CASE("ATE is invariant under a common rigid transform of both trajectories") {
  Rng rng(54);
  Trajectory gt, est;
  for (int i = 0; i < 120; ++i) {
    Se3Pose p;
    p.translation = Vec3(0.5 * i, 2.0 * std::sin(0.1 * i), 0.0);
    p.rotation = yaw_quat(0.05 * i);
    gt.push_back(i, p);
    Se3Pose e = p;
    e.translation += 0.1 * Vec3(rng.normal(), rng.normal(), rng.normal());
    est.push_back(i, e);
  }
  const double base = ate(est, gt).aligned_rmse;

  Se3Pose g;
  g.translation = Vec3(-20.0, 8.0, 5.0);
  g.rotation = Quat(Eigen::AngleAxisd(0.7, Vec3(0.6, -0.2, 0.77).normalized()));
  Trajectory gt2, est2;
  for (const auto& p : gt.poses) gt2.push_back(p.timestamp, g * p.pose);
  for (const auto& p : est.poses) est2.push_back(p.timestamp, g * p.pose);
  CHECK(std::abs(ate(est2, gt2).aligned_rmse - base) < 1e-9);
}

TEST_CASE("a single displaced pose contributes its share of the RMSE") {
  const int n = 400;
  Trajectory gt;
  for (int i = 0; i < n; ++i) {
    const int side = i / 100;
    const double along = i % 100;
    Se3Pose p;
    if (side == 0)
      p.translation = Vec3(along, 0, 0);
    else if (side == 1)
      p.translation = Vec3(100, along, 0);
    else if (side == 2)
      p.translation = Vec3(100 - along, 100, 0);
    else
      p.translation = Vec3(0, 100 - along, 0);
    gt.push_back(i, p);
  }
  Trajectory est = gt;
  est.poses[250].pose.translation += Vec3(0.0, 1.0, 0.0);
  auto r = ate(est, gt);
  CHECK(r.unaligned_rmse == doctest::Approx(1.0 / std::sqrt(n)));
  CHECK(r.aligned_rmse <= r.unaligned_rmse + 1e-12);
}

TEST_CASE("too few matched timestamps are rejected") {
  Trajectory a = straight_line(2, 1.0);
  CHECK_THROWS_AS(ate(a, a), UndefinedMetricError);

  Trajectory est = straight_line(10, 1.0);
  Trajectory gt;
  gt.push_back(100.0, Se3Pose::identity());
  gt.push_back(101.0, Se3Pose::identity());
  gt.push_back(102.0, Se3Pose::identity());
  CHECK_THROWS_AS(ate(est, gt), UndefinedMetricError);
}

TEST_CASE("partially matching timestamps are paired by intersection") {
  Trajectory gt = straight_line(50, 1.0);
  Trajectory est;
  for (int i = 0; i < 50; i += 2) est.push_back(gt.poses[i].timestamp, gt.poses[i].pose);
  auto r = ate(est, gt);
  CHECK(r.matched_poses == 25);
  CHECK(r.aligned_rmse < 1e-12);
}
