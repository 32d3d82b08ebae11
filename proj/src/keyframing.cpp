#include "radarloop/keyframing.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <map>
#include <tuple>

namespace radarloop {

std::vector<SurfacePoint> compute_surface_points(const PointCloud& cloud, double cell_size,
                                                 int min_points, double planarity_max_ratio) {
  using CellKey = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::map<CellKey, std::vector<int>> cells;
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    const Vec3& p = cloud[i].position;
    cells[{static_cast<std::int64_t>(std::floor(p.x() / cell_size)),
           static_cast<std::int64_t>(std::floor(p.y() / cell_size)),
           static_cast<std::int64_t>(std::floor(p.z() / cell_size))}]
        .push_back(i);
  }

  std::vector<SurfacePoint> out;
  for (const auto& [key, idx] : cells) {
    if (static_cast<int>(idx.size()) < min_points) continue;
    Vec3 mean = Vec3::Zero();
    for (int i : idx) mean += cloud[i].position;
    mean /= static_cast<double>(idx.size());
    Mat3 cov = Mat3::Zero();
    for (int i : idx) {
      const Vec3 d = cloud[i].position - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(idx.size());

    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 evals = eig.eigenvalues();  // ascending
    if (evals(1) < 1e-12) continue;
    if (evals(0) / evals(1) > planarity_max_ratio) continue;

    SurfacePoint sp;
    sp.mean = mean;
    sp.normal = eig.eigenvectors().col(0).normalized();
    if (sp.normal.dot(mean) > 0.0) sp.normal = -sp.normal;
    sp.weight = static_cast<double>(idx.size());
    out.push_back(sp);
  }
  return out;
}

std::vector<Keyframe> select_keyframes(const Trajectory& traj,
                                       const std::vector<RadarScan>& scans,
                                       const std::vector<PointCloud>& inlier_clouds,
                                       const KeyframeConfig& cfg) {
  if (traj.size() != scans.size() || scans.size() != inlier_clouds.size())
    throw DataError("keyframe selection inputs are not index-aligned");
  std::vector<Keyframe> out;
  if (traj.empty()) return out;

  const double rot_gate = cfg.rotation_gate_deg * M_PI / 180.0;
  double path_length = 0.0;
  Se3Pose last_pose;
  std::size_t window_start = 0;

  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (i > 0)
      path_length += (traj[i].pose.translation - traj[i - 1].pose.translation).norm();

    bool emit = out.empty();
    if (!emit) {
      const Se3Pose rel = last_pose.inverse() * traj[i].pose;
      emit = rel.translation.norm() >= cfg.translation_gate ||
             rel.rotation_angle() >= rot_gate;
    }
    if (!emit) continue;

    Keyframe kf;
    kf.id = static_cast<int>(out.size());
    kf.scan_index = static_cast<int>(i);
    kf.timestamp = traj[i].timestamp;
    kf.odom_pose = traj[i].pose;
    kf.imu_orientation = scans[i].imu_orientation;
    const Se3Pose to_kf = traj[i].pose.inverse();
    for (std::size_t j = window_start; j <= i; ++j) {
      const PointCloud moved = transform_cloud(inlier_clouds[j], to_kf * traj[j].pose);
      kf.inlier_cloud.insert(kf.inlier_cloud.end(), moved.begin(), moved.end());
    }
    kf.surface_points = compute_surface_points(kf.inlier_cloud, cfg.surface_cell,
                                               cfg.surface_min_points, cfg.planarity_max_ratio);
    kf.path_length = path_length;
    out.push_back(std::move(kf));
    last_pose = traj[i].pose;
    window_start = i + 1;
  }
  return out;
}

PointCloud accumulate_keyframes(const std::vector<Keyframe>& frames, int count) {
  if (frames.empty() || count < 1) return {};
  const std::size_t first =
      frames.size() > static_cast<std::size_t>(count) ? frames.size() - count : 0;
  const Se3Pose newest_inv = frames.back().odom_pose.inverse();
  PointCloud merged;
  for (std::size_t i = first; i < frames.size(); ++i) {
    const Se3Pose rel = newest_inv * frames[i].odom_pose;
    const PointCloud moved = transform_cloud(frames[i].inlier_cloud, rel);
    merged.insert(merged.end(), moved.begin(), moved.end());
  }
  return merged;
}

}  // namespace radarloop
