#pragma once

#include <optional>
#include <string>
#include <vector>

#include "radarloop/geometry.hpp"
#include "radarloop/rng.hpp"

namespace radarloop {

struct RectSurface {
  Vec3 origin;  // one corner
  Vec3 edge_u;
  Vec3 edge_v;
  double reflectivity = 100.0;

  Vec3 normal() const { return edge_u.cross(edge_v).normalized(); }
  Vec3 center() const { return origin + 0.5 * edge_u + 0.5 * edge_v; }
  double area() const { return edge_u.cross(edge_v).norm(); }
};

struct CylinderSurface {
  Vec3 base;  // center of the bottom circle, vertical axis
  double radius = 0.3;
  double height = 6.0;
  double reflectivity = 200.0;
};

struct WorldModel {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<RectSurface> rects;
  std::vector<CylinderSurface> cylinders;
  bool has_ground = true;
  double ground_z = 0.0;
  double ground_reflectivity = 25.0;
  Vec3 bounds_min{-50.0, -50.0, -1.0};
  Vec3 bounds_max{50.0, 50.0, 10.0};
  // Built-in routes at sensor height: the scenario's default drive and a
  // closed circuit suitable for same-direction revisit laps.
  std::vector<Vec3> canonical_waypoints;
  std::vector<Vec3> loop_waypoints;
};

// scenario is "tunnel" or "forest"; unknown ids raise ConfigError.
WorldModel generate_world(std::uint64_t seed, const std::string& scenario);

struct SensorModel {
  double azimuth_fov_deg = 60.0;    // half-angle
  double elevation_fov_deg = 15.0;  // half-angle
  double max_range = 40.0;
  double min_range = 0.5;
  double range_sigma = 0.05;
  double angular_sigma_deg = 0.2;
  double doppler_sigma = 0.05;
  double intensity_sigma = 0.1;     // multiplicative log-normal spread
  double ground_return_rate = 40.0; // extra downward rays per scan
  double dropout_prob = 0.05;
  int points_per_scan = 300;
  double outlier_fraction = 0.1;       // dynamic points with corrupted doppler
  double outlier_doppler_range = 3.0;  // m/s, uniform
  // Strong reflectors return small clusters of detections rather than lone
  // points; a fraction of the ray budget is aimed at surfaces in groups.
  double cluster_fraction = 0.65;
  int cluster_size = 8;
  double cluster_jitter_deg = 0.8;
};

struct RayHit {
  double range = 0.0;
  double reflectivity = 0.0;
  bool ground = false;
};

// Nearest surface intersection along origin + t*dir, t in (0, max_range].
std::optional<RayHit> cast_ray(const WorldModel& world, const Vec3& origin, const Vec3& dir,
                               double max_range);

RadarScan simulate_scan(const WorldModel& world, const Se3Pose& sensor_pose,
                        const Vec3& ego_velocity_world, const SensorModel& sensor, Rng& rng);

struct PathSpec {
  std::vector<Vec3> waypoints;  // at sensor height
  bool closed = false;          // return to the first waypoint each lap
  int laps = 1;
  bool out_and_back = false;  // traverse forward, U-turn, traverse back
  double speed = 1.5;         // m/s on straights
  double turn_rate_deg = 45.0;  // in-place turning at waypoints
  double imu_drift_rate_deg = 0.15;  // yaw random walk, deg per sqrt(s)
};

// Piecewise-constant-rate timeline over straights and in-place turns,
// evaluated in closed form.
class PathSampler {
 public:
  static PathSampler build(const PathSpec& spec);

  double total_time() const { return total_time_; }
  Se3Pose pose_at(double t) const;
  Vec3 velocity_at(double t) const;  // world frame

 private:
  struct Segment {
    double t0 = 0.0, t1 = 0.0;
    bool turning = false;
    Vec3 p0{0, 0, 0}, p1{0, 0, 0};
    double h0 = 0.0, h1 = 0.0;  // heading (yaw), radians
  };
  std::vector<Segment> segments_;
  double total_time_ = 0.0;
};

struct SequenceData {
  std::vector<RadarScan> scans;
  Trajectory ground_truth;          // sensor pose per scan
  std::vector<Vec3> gt_velocities;  // world frame per scan
};

SequenceData generate_sequence(const WorldModel& world, const PathSpec& path,
                               const SensorModel& sensor, double rate_hz, std::uint64_t seed);

// Dataset directory: manifest.json + gt.tum + scans/NNNNNN.csv.
void save_dataset(const SequenceData& seq, const std::string& dir);
SequenceData load_dataset(const std::string& dir);

void save_scan_csv(const PointCloud& cloud, const std::string& path);
PointCloud load_scan_csv(const std::string& path);

}  // namespace radarloop
