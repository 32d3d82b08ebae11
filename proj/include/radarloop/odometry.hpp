#pragma once

#include <optional>
#include <vector>

#include "radarloop/geometry.hpp"

namespace radarloop {

struct RansacConfig {
  int max_iterations = 100;
  double inlier_threshold = 0.2;  // m/s
  int min_inlier_count = 10;
  std::uint64_t seed = 0;
  double max_condition = 1e6;  // gate for the 3x3 direction matrix
};

struct EgoVelocityEstimate {
  Vec3 velocity = Vec3::Zero();  // sensor frame
  std::vector<int> inlier_indices;
  int iterations_used = 0;
};

// Three-point RANSAC over u_i . v = -doppler_i followed by a least-squares
// refit on the inlier set. nullopt when no hypothesis reaches the minimum
// inlier count.
std::optional<EgoVelocityEstimate> estimate_ego_velocity(const RadarScan& scan,
                                                         const RansacConfig& cfg);

struct OdometryConfig {
  RansacConfig ransac;
};

struct OdometryResult {
  Trajectory trajectory;            // orientation from IMU, position integrated
  std::vector<Vec3> velocities;     // world frame, per scan
  std::vector<bool> estimation_ok;  // false where the previous velocity was held
  std::vector<PointCloud> inlier_clouds;  // static returns per scan, sensor frame
};

OdometryResult integrate_odometry(const std::vector<RadarScan>& scans,
                                  const OdometryConfig& cfg);

}  // namespace radarloop
