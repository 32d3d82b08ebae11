#include "radarloop/odometry.hpp"

#include <Eigen/SVD>

#include "radarloop/rng.hpp"

namespace radarloop {

namespace {

Vec3 solve_least_squares(const std::vector<Vec3>& dirs, const std::vector<double>& doppler,
                         const std::vector<int>& idx) {
  Eigen::MatrixXd a(idx.size(), 3);
  Eigen::VectorXd b(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    a.row(k) = dirs[idx[k]].transpose();
    b(k) = -doppler[idx[k]];
  }
  return a.colPivHouseholderQr().solve(b);
}

std::vector<int> classify_inliers(const std::vector<Vec3>& dirs,
                                  const std::vector<double>& doppler, const Vec3& v,
                                  double threshold) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(dirs.size()); ++i)
    if (std::abs(dirs[i].dot(v) + doppler[i]) <= threshold) out.push_back(i);
  return out;
}

}  // namespace

std::optional<EgoVelocityEstimate> estimate_ego_velocity(const RadarScan& scan,
                                                         const RansacConfig& cfg) {
  const int n = static_cast<int>(scan.points.size());
  if (n < 3 || n < cfg.min_inlier_count) return std::nullopt;

  std::vector<Vec3> dirs(n);
  std::vector<double> doppler(n);
  for (int i = 0; i < n; ++i) {
    const double norm = scan.points[i].position.norm();
    if (norm < 1e-9) return std::nullopt;
    dirs[i] = scan.points[i].position / norm;
    doppler[i] = scan.points[i].doppler;
  }

  Rng rng(cfg.seed);
  int best_count = 0;
  Vec3 best_v = Vec3::Zero();
  int iterations = 0;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    ++iterations;
    int i0 = static_cast<int>(rng.uniform_index(n));
    int i1 = static_cast<int>(rng.uniform_index(n));
    int i2 = static_cast<int>(rng.uniform_index(n));
    if (i0 == i1 || i1 == i2 || i0 == i2) continue;

    Mat3 a;
    a.row(0) = dirs[i0].transpose();
    a.row(1) = dirs[i1].transpose();
    a.row(2) = dirs[i2].transpose();
    const Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(2);
    if (smin <= smax / cfg.max_condition) continue;

    const Vec3 rhs(-doppler[i0], -doppler[i1], -doppler[i2]);
    const Vec3 v = svd.solve(rhs);

    int count = 0;
    for (int i = 0; i < n; ++i)
      if (std::abs(dirs[i].dot(v) + doppler[i]) <= cfg.inlier_threshold) ++count;
    if (count > best_count) {
      best_count = count;
      best_v = v;
    }
  }

  if (best_count < std::max(3, cfg.min_inlier_count)) return std::nullopt;

  // Refit and re-classify until the inlier set settles, so the stored set is
  // consistent with the returned velocity.
  std::vector<int> inliers = classify_inliers(dirs, doppler, best_v, cfg.inlier_threshold);
  Vec3 v = best_v;
  for (int round = 0; round < 20 && static_cast<int>(inliers.size()) >= 3; ++round) {
    v = solve_least_squares(dirs, doppler, inliers);
    std::vector<int> next = classify_inliers(dirs, doppler, v, cfg.inlier_threshold);
    const bool stable = next == inliers;
    inliers = std::move(next);
    if (stable) break;
  }
  if (static_cast<int>(inliers.size()) < std::max(3, cfg.min_inlier_count)) return std::nullopt;

  EgoVelocityEstimate est;
  est.velocity = v;
  est.inlier_indices = std::move(inliers);
  est.iterations_used = iterations;
  return est;
}

OdometryResult integrate_odometry(const std::vector<RadarScan>& scans,
                                  const OdometryConfig& cfg) {
  if (scans.empty()) throw DataError("no scans to integrate");
  for (std::size_t i = 1; i < scans.size(); ++i)
    if (scans[i].timestamp <= scans[i - 1].timestamp)
      throw DataError("scan timestamps must be strictly increasing");

  OdometryResult out;
  Vec3 v_sensor_prev = Vec3::Zero();
  Vec3 v_world_prev = Vec3::Zero();
  Vec3 position = Vec3::Zero();

  for (std::size_t k = 0; k < scans.size(); ++k) {
    RansacConfig scan_cfg = cfg.ransac;
    scan_cfg.seed = Rng::child(cfg.ransac.seed, k).next_u64();
    const auto est = estimate_ego_velocity(scans[k], scan_cfg);

    Vec3 v_sensor;
    PointCloud inlier_cloud;
    if (est) {
      v_sensor = est->velocity;
      inlier_cloud.reserve(est->inlier_indices.size());
      for (int idx : est->inlier_indices) inlier_cloud.push_back(scans[k].points[idx]);
    } else {
      v_sensor = v_sensor_prev;
      inlier_cloud = scans[k].points;
    }
    out.estimation_ok.push_back(est.has_value());
    out.inlier_clouds.push_back(std::move(inlier_cloud));

    const Vec3 v_world = scans[k].imu_orientation * v_sensor;
    if (k > 0) {
      const double dt = scans[k].timestamp - scans[k - 1].timestamp;
      position += 0.5 * (v_world_prev + v_world) * dt;
    }
    Se3Pose pose;
    pose.rotation = scans[k].imu_orientation.normalized();
    pose.translation = position;
    out.trajectory.push_back(scans[k].timestamp, pose);
    out.velocities.push_back(v_world);

    v_sensor_prev = v_sensor;
    v_world_prev = v_world;
  }
  return out;
}

}  // namespace radarloop
