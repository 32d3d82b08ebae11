#pragma once

#include <vector>

#include "radarloop/geometry.hpp"

namespace radarloop {

struct SurfacePoint {
  Vec3 mean{0, 0, 0};
  Vec3 normal{0, 0, 1};
  double weight = 0.0;  // point count in the cell
};

struct Keyframe {
  int id = 0;
  int scan_index = 0;
  double timestamp = 0.0;
  Se3Pose odom_pose;
  Quat imu_orientation{1, 0, 0, 0};
  PointCloud inlier_cloud;                   // sensor frame
  std::vector<SurfacePoint> surface_points;  // sensor frame
  double path_length = 0.0;                  // odometry travel at creation
};

struct KeyframeConfig {
  double translation_gate = 1.5;  // m
  double rotation_gate_deg = 5.0;
  double surface_cell = 1.0;  // m
  int surface_min_points = 6;
  double planarity_max_ratio = 0.5;  // smallest over middle eigenvalue
};

// Voxel-grid cell statistics: per cell with enough points, the mean and the
// smallest-eigenvalue direction of the covariance, oriented toward the sensor
// origin. Cells whose spread is not plate-like are dropped.
std::vector<SurfacePoint> compute_surface_points(const PointCloud& cloud, double cell_size,
                                                 int min_points,
                                                 double planarity_max_ratio = 0.5);

// Greedy gate on relative motion since the last keyframe; the first scan is
// always kept. traj, scans and inlier_clouds are index-aligned. A keyframe's
// cloud merges the inlier clouds of every scan since the previous keyframe,
// expressed in the keyframe's sensor frame via relative odometry.
std::vector<Keyframe> select_keyframes(const Trajectory& traj,
                                       const std::vector<RadarScan>& scans,
                                       const std::vector<PointCloud>& inlier_clouds,
                                       const KeyframeConfig& cfg);

// Inlier clouds of the last `count` frames (fewer if not available), moved by
// relative odometry into the newest frame and concatenated.
PointCloud accumulate_keyframes(const std::vector<Keyframe>& frames, int count);

}  // namespace radarloop
