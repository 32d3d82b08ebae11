#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "radarloop/errors.hpp"
#include "radarloop/evaluation.hpp"
#include "radarloop/loop_verification.hpp"
#include "radarloop/rng.hpp"

using namespace radarloop;

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Dense enough that the 1 m surface cells reach their minimum point count.
std::vector<Vec3> room_world(Rng& rng) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 3000; ++i)
    pts.push_back(Vec3(rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0), 0.0));
  for (int i = 0; i < 700; ++i)
    pts.push_back(Vec3(8.0, rng.uniform(-8.0, 8.0), rng.uniform(0.2, 4.0)));
  for (int i = 0; i < 700; ++i)
    pts.push_back(Vec3(-8.0, rng.uniform(-8.0, 8.0), rng.uniform(0.2, 4.0)));
  for (int i = 0; i < 700; ++i)
    pts.push_back(Vec3(rng.uniform(-8.0, 8.0), 8.0, rng.uniform(0.2, 4.0)));
  for (int i = 0; i < 700; ++i)
    pts.push_back(Vec3(rng.uniform(-8.0, 8.0), -8.0, rng.uniform(0.2, 4.0)));
  return pts;
}

PointCloud local_cloud(const std::vector<Vec3>& world_pts, const Se3Pose& frame, Rng& rng) {
  const Se3Pose inv = frame.inverse();
  PointCloud cloud;
  for (const auto& p : world_pts) {
    RadarPoint rp;
    rp.position = inv.apply(p + 0.02 * Vec3(rng.normal(), rng.normal(), rng.normal()));
    rp.intensity = 10.0;
    rp.doppler = 0.0;
    cloud.push_back(rp);
  }
  return cloud;
}

Keyframe frame_from_cloud(int id, const Se3Pose& odom, PointCloud cloud, double path_length) {
  Keyframe kf;
  kf.id = id;
  kf.scan_index = id;
  kf.timestamp = id;
  kf.odom_pose = odom;
  kf.imu_orientation = odom.rotation;
  kf.inlier_cloud = std::move(cloud);
  kf.surface_points = compute_surface_points(kf.inlier_cloud, 1.0, 6);
  kf.path_length = path_length;
  return kf;
}

// d_align rewards overlap and correspondence quality, penalises the
// joint-minus-separate entropy gap and residual cost.
AlignmentClassifier hand_alignment_model() {
  AlignmentClassifier model;
  model.beta = (Eigen::Matrix<double, 7, 1>() << -1.0, 1.0, 3.0, -2.0, 0.5, 0.0, 0.0).finished();
  return model;
}

LoopClassifier hand_loop_model() {
  LoopClassifier model;
  model.theta << -0.5, -1.0, 2.0, 0.0;
  return model;
}

LoopCandidate scored(int id, double y) {
  LoopCandidate c;
  c.candidate_id = id;
  c.y_loop = y;
  return c;
}

// Sixteen keyframes around a 12-step circle; the last four revisit the
// first arc, so gaps of 10..14 steps are genuine loops under the 6 m rule.
struct LoopScene {
  std::vector<Keyframe> frames;
  std::vector<ScanContextDescriptor> descriptors;
  Trajectory gt;
  RetrievalConfig retrieval;
};

LoopScene circle_scene() {
  Rng rng(97);
  const auto world = room_world(rng);
  LoopScene scene;
  scene.retrieval.accumulation = 1;
  scene.retrieval.top_k = 6;
  scene.retrieval.recency_exclusion = 3;

  const double radius = 5.0;
  const double step = 2.0 * M_PI / 12.0;
  double path = 0.0;
  Vec3 prev(0.0, 0.0, 0.0);
  for (int i = 0; i < 16; ++i) {
    Se3Pose pose;
    pose.translation =
        Vec3(2.5 + radius * std::cos(step * i), radius * std::sin(step * i), 1.0);
    pose.rotation = yaw_quat(step * i + M_PI / 2.0);
    if (i > 0) path += (pose.translation - prev).norm();
    prev = pose.translation;
    scene.frames.push_back(
        frame_from_cloud(i, pose, local_cloud(world, pose, rng), path));
    scene.gt.push_back(i, pose);
  }
  for (int i = 0; i < 16; ++i)
    scene.descriptors.push_back(build_keyframe_descriptor(scene.frames, i, scene.retrieval));
  return scene;
}

struct TrainingRows {
  std::vector<Eigen::Vector3d> features;
  std::vector<int> labels;
};

// Mirrors the training data collection through the public retrieval and
// verification calls so the convenience trainer can be cross-checked.
TrainingRows collect_rows(const LoopScene& scene, const AlignmentClassifier& alignment,
                          const LoopTrainingConfig& cfg) {
  LoopLabelConfig label_cfg;
  label_cfg.distance_threshold = cfg.gt_distance_threshold;
  label_cfg.recency_exclusion = cfg.retrieval.recency_exclusion;
  const auto labels = label_ground_truth_loops(scene.gt, scene.frames, label_cfg);

  const LoopClassifier untrained;
  TrainingRows rows;
  for (std::size_t qi = 0; qi < scene.frames.size(); ++qi) {
    const auto matches = retrieve_candidates(scene.descriptors[qi], scene.frames[qi],
                                             scene.descriptors, scene.frames, cfg.retrieval);
    for (const auto& m : matches) {
      const auto cand = verify_candidate(scene.frames[qi], scene.frames[m.candidate_id], m,
                                         alignment, untrained, cfg.verification);
      if (cand.no_overlap) continue;
      for (const auto& l : labels) {
        if (l.query_id != cand.query_id || l.candidate_id != cand.candidate_id) continue;
        rows.features.emplace_back(cand.d_odom, cand.d_sc, cand.d_align);
        rows.labels.push_back(l.is_true ? 1 : 0);
        break;
      }
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("a query verified against itself registers at identity with a high score") {
  Rng rng(61);
  const auto world = room_world(rng);
  Se3Pose pose;
  pose.translation = Vec3(1.0, 0.5, 1.0);
  pose.rotation = yaw_quat(0.3);
  const auto kf = frame_from_cloud(0, pose, local_cloud(world, pose, rng), 0.0);

  Se3Pose far_pose = pose;
  far_pose.translation += Vec3(5.0, -4.0, 0.0);
  const auto other = frame_from_cloud(1, far_pose, local_cloud(world, far_pose, rng), 10.0);

  RetrievalMatch match;
  match.candidate_id = 0;
  VerificationConfig cfg;
  const auto self = verify_candidate(kf, kf, match, hand_alignment_model(), hand_loop_model(), cfg);

  CHECK_FALSE(self.no_overlap);
  CHECK(self.registration.converged);
  CHECK(self.registration.pose.translation.norm() < 1e-6);
  CHECK(rotation_distance(self.registration.pose.rotation, Quat::Identity()) < 1e-6);
  CHECK(self.y_loop > 0.99);

  match.candidate_id = 1;
  const auto offset =
      verify_candidate(kf, other, match, hand_alignment_model(), hand_loop_model(), cfg);
  CHECK(self.d_align > offset.d_align);
}

TEST_CASE("a candidate with no overlapping structure is kept with a zero score") {
  Rng rng(62);
  const auto world = room_world(rng);
  const auto query = frame_from_cloud(5, Se3Pose::identity(), local_cloud(world, Se3Pose::identity(), rng), 0.0);

  std::vector<Vec3> far_world;
  for (const auto& p : world) far_world.push_back(p + Vec3(500.0, 0.0, 0.0));
  const auto candidate =
      frame_from_cloud(0, Se3Pose::identity(), local_cloud(far_world, Se3Pose::identity(), rng), 0.0);

  RetrievalMatch match;
  match.candidate_id = 0;
  match.d_sc = 0.4;
  match.d_odom = 2.0;
  match.shift = 15;
  VerificationConfig cfg;
  const auto out =
      verify_candidate(query, candidate, match, hand_alignment_model(), hand_loop_model(), cfg);

  CHECK(out.no_overlap);
  CHECK(out.y_loop == 0.0);
  CHECK(out.d_align == 0.0);
  // The failed registration records the yaw initial guess untouched.
  const double init_yaw = 15.0 * 2.0 * M_PI / cfg.descriptor.n_sec;
  CHECK(rotation_distance(out.registration.pose.rotation, yaw_quat(init_yaw)) < 1e-12);
  CHECK(out.registration.pose.translation.norm() == 0.0);
}

TEST_CASE("the descriptor shift seeds registration close enough to recover a large yaw") {
  Rng rng(63);
  const auto world = room_world(rng);
  const auto candidate =
      frame_from_cloud(0, Se3Pose::identity(), local_cloud(world, Se3Pose::identity(), rng), 0.0);

  // The query sits at the same spot rotated by 58 degrees; a ten sector
  // shift seeds the solver at 60 degrees, well inside its basin.
  const double yaw = 58.0 * M_PI / 180.0;
  Se3Pose query_pose;
  query_pose.rotation = yaw_quat(yaw);
  const auto query =
      frame_from_cloud(30, query_pose, local_cloud(world, query_pose, rng), 80.0);

  RetrievalMatch match;
  match.candidate_id = 0;
  match.shift = 10;
  VerificationConfig cfg;
  const auto out =
      verify_candidate(query, candidate, match, hand_alignment_model(), hand_loop_model(), cfg);

  CHECK_FALSE(out.no_overlap);
  // The initial guess is 2 degrees off; the refined pose lands well under
  // half a degree even though the cell means bin differently after rotation.
  CHECK(rotation_distance(out.registration.pose.rotation, yaw_quat(yaw)) < 5e-3);
  CHECK(out.registration.pose.translation.norm() < 0.05);
  CHECK(out.y_loop > 0.5);
}

TEST_CASE("the loop score is exactly the logistic of the weighted features") {
  LoopClassifier model;
  model.theta << 0.7, -1.3, 2.2, -0.4;
  const double d_odom = 1.7, d_sc = 0.35, d_align = 2.6;
  Eigen::Matrix<double, 4, 1> x;
  x << d_odom, d_sc, d_align, 1.0;
  CHECK(model.score(d_odom, d_sc, d_align) == logistic(model.theta.dot(x)));
}

TEST_CASE("a positive alignment weight makes the score monotone in the alignment score") {
  LoopClassifier model;
  model.theta << -0.8, -1.1, 1.7, 0.2;
  Rng rng(64);
  for (int i = 0; i < 200; ++i) {
    const double d_odom = rng.uniform(0.0, 5.0);
    const double d_sc = rng.uniform(0.0, 2.0);
    const double a = rng.uniform(-4.0, 4.0);
    const double b = a + rng.uniform(0.0, 3.0);
    CHECK(model.score(d_odom, d_sc, a) <= model.score(d_odom, d_sc, b));
  }
}

TEST_CASE("selection returns the best candidate strictly above the threshold") {
  std::vector<LoopCandidate> verified{scored(3, 0.3), scored(7, 0.95), scored(9, 0.8)};
  const auto best = select_best(verified, 0.9);
  REQUIRE(best.has_value());
  CHECK(best->candidate_id == 7);
  CHECK(best->y_loop == 0.95);
}

TEST_CASE("selection is empty when every candidate scores at or below the threshold") {
  CHECK_FALSE(select_best({scored(1, 0.2), scored(2, 0.85)}, 0.9).has_value());
  // A score exactly at the threshold does not qualify.
  CHECK_FALSE(select_best({scored(1, 0.9)}, 0.9).has_value());
  CHECK_FALSE(select_best({}, 0.9).has_value());
}

TEST_CASE("equal scores resolve to the lower candidate id") {
  std::vector<LoopCandidate> verified{scored(12, 0.95), scored(4, 0.95), scored(8, 0.95)};
  const auto best = select_best(verified, 0.9);
  REQUIRE(best.has_value());
  CHECK(best->candidate_id == 4);
}

TEST_CASE("flipping every label negates the fitted weights") {
  Rng rng(65);
  std::vector<Eigen::Vector3d> features;
  std::vector<int> labels, flipped;
  for (int i = 0; i < 120; ++i) {
    const int y = i % 2;
    Eigen::Vector3d f(rng.uniform(0.0, 5.0), rng.uniform(0.0, 2.0),
                      (y ? 2.0 : -2.0) + rng.normal());
    features.push_back(f);
    labels.push_back(y);
    flipped.push_back(1 - y);
  }
  const auto a = fit_loop_classifier(features, labels);
  const auto b = fit_loop_classifier(features, flipped);
  CHECK((a.theta + b.theta).norm() < 1e-6);
}

TEST_CASE("separable toy features are classified perfectly at a 0.5 threshold") {
  Rng rng(66);
  std::vector<Eigen::Vector3d> features;
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) {
    const int y = i % 2;
    features.emplace_back(y ? 0.2 : 4.5, y ? 0.1 : 1.5, y ? 3.0 : -3.0);
    labels.push_back(y);
  }
  const auto model = fit_loop_classifier(features, labels, 0.5);
  CHECK(model.y_th == 0.5);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double y = model.score(features[i][0], features[i][1], features[i][2]);
    CHECK((y > 0.5) == (labels[i] == 1));
  }
}

TEST_CASE("single-class loop labels cannot be fitted") {
  std::vector<Eigen::Vector3d> features{{1.0, 0.5, 2.0}, {2.0, 0.7, 1.0}};
  CHECK_THROWS_AS(fit_loop_classifier(features, {1, 1}), TrainingFailedError);
  CHECK_THROWS_AS(fit_loop_classifier(features, {0, 0}), TrainingFailedError);
  CHECK_THROWS_AS(fit_loop_classifier({}, {}), TrainingFailedError);
}

TEST_CASE("training on a revisiting circle separates true loops from near misses") {
  const auto scene = circle_scene();
  LoopTrainingConfig cfg;
  cfg.retrieval = scene.retrieval;
  const auto alignment = hand_alignment_model();

  const auto model =
      train_loop_classifier(scene.frames, scene.descriptors, scene.gt, alignment, cfg);
  CHECK(model.y_th == 0.9);

  const auto rows = collect_rows(scene, alignment, cfg);
  REQUIRE(rows.features.size() > 20);
  int positives = 0;
  for (int y : rows.labels) positives += y;
  REQUIRE(positives > 5);
  REQUIRE(positives < static_cast<int>(rows.labels.size()) - 5);

  // The convenience trainer matches a manual fit on the same rows.
  const auto manual = fit_loop_classifier(rows.features, rows.labels, cfg.y_th, cfg.lambda);
  CHECK((model.theta - manual.theta).norm() < 1e-12);

  std::vector<double> scores;
  for (const auto& f : rows.features) scores.push_back(model.score(f[0], f[1], f[2]));
  const auto roc = roc_curve(scores, rows.labels);
  CHECK(roc.auroc >= 0.9);
}

TEST_CASE("loop training is deterministic") {
  const auto scene = circle_scene();
  LoopTrainingConfig cfg;
  cfg.retrieval = scene.retrieval;
  const auto alignment = hand_alignment_model();
  const auto a = train_loop_classifier(scene.frames, scene.descriptors, scene.gt, alignment, cfg);
  const auto b = train_loop_classifier(scene.frames, scene.descriptors, scene.gt, alignment, cfg);
  CHECK((a.theta - b.theta).norm() == 0.0);
}

TEST_CASE("the loop model survives a save and load round trip") {
  LoopClassifier model;
  model.theta << 1.25, -0.75, 3.5, -2.0;
  model.y_th = 0.8;
  const std::string path = (std::filesystem::temp_directory_path() / "loop_model.json").string();
  save_loop_model(model, path);
  const auto loaded = load_loop_model(path);
  CHECK((loaded.theta - model.theta).norm() == 0.0);
  CHECK(loaded.y_th == model.y_th);
  std::remove(path.c_str());
}

TEST_CASE("malformed loop model files are rejected") {
  const std::string path = (std::filesystem::temp_directory_path() / "bad_loop_model.json").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs("{\"y_th\": 0.9}", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_loop_model(path), DataError);
  CHECK_THROWS_AS(load_loop_model("/nonexistent/loop_model.json"), DataError);
  std::remove(path.c_str());
}
