#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "radarloop/errors.hpp"

namespace radarloop {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Quat = Eigen::Quaterniond;

// Rigid transform in SE(3). Hamilton quaternion, kept unit-norm; serialized
// scalar-last (TUM order qx qy qz qw).
struct Se3Pose {
  Quat rotation{1.0, 0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};

  static Se3Pose identity() { return Se3Pose{}; }

  Se3Pose inverse() const {
    Se3Pose out;
    out.rotation = rotation.conjugate();
    out.translation = -(out.rotation * translation);
    out.rotation.normalize();
    return out;
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

  // Rotation angle in [0, pi].
  double rotation_angle() const {
    Quat q = rotation;
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    return 2.0 * std::atan2(q.vec().norm(), q.w());
  }

  void normalize() { rotation.normalize(); }
};

// a then b applied on top: (a*b).apply(p) == a.apply(b.apply(p)).
Se3Pose se3_compose(const Se3Pose& a, const Se3Pose& b);

inline Se3Pose operator*(const Se3Pose& a, const Se3Pose& b) { return se3_compose(a, b); }

// se(3) tangent layout: [rho; phi] (translation block first, rotation last).
// Proper SE(3) exponential/logarithm (with the coupling V-matrix).
Se3Pose se3_exp(const Vec6& xi);
// Throws AmbiguousLogError when the rotation angle is at pi.
Vec6 se3_log(const Se3Pose& pose);

Mat3 skew(const Vec3& v);
Mat3 so3_exp(const Vec3& phi);
Vec3 so3_log(const Mat3& rot);
Vec3 quat_log(const Quat& q);  // rotation vector, angle in [0, pi]
Mat3 so3_left_jacobian(const Vec3& phi);
Mat3 so3_left_jacobian_inv(const Vec3& phi);

// 6x6 adjoint of a pose for the [rho; phi] layout.
Mat6 se3_adjoint(const Se3Pose& pose);
// Inverse left/right Jacobians of SE(3) at tangent xi (Barfoot's Q-matrix form).
Mat6 se3_left_jacobian_inv(const Vec6& xi);
Mat6 se3_right_jacobian_inv(const Vec6& xi);

// Yaw of a rotation under the ZYX convention.
double yaw_of(const Quat& q);
Quat yaw_quat(double yaw);
// Angle between two rotations in radians.
double rotation_distance(const Quat& a, const Quat& b);
// Rotation that removes roll and pitch but keeps yaw: applying it to
// sensor-frame points yields a frame parallel to the ground plane that
// still turns with the sensor.
Quat leveling_rotation(const Quat& sensor_to_world);

// One radar return. doppler is the radial velocity in m/s, positive when the
// point moves away from the sensor: doppler = -u . v_sensor for a static world.
struct RadarPoint {
  Vec3 position{0.0, 0.0, 0.0};  // sensor frame, meters
  double intensity = 0.0;        // arbitrary units, >= 0
  double doppler = 0.0;          // m/s
};

using PointCloud = std::vector<RadarPoint>;

struct RadarScan {
  PointCloud points;
  double timestamp = 0.0;
  Quat imu_orientation{1.0, 0.0, 0.0, 0.0};  // sensor -> world
};

struct TimedPose {
  double timestamp = 0.0;
  Se3Pose pose;
};

struct Trajectory {
  std::vector<TimedPose> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
  const TimedPose& operator[](std::size_t i) const { return poses[i]; }
  TimedPose& operator[](std::size_t i) { return poses[i]; }
  void push_back(double t, const Se3Pose& p) { poses.push_back({t, p}); }

  // Cumulative translation distance up to each pose; front() == 0.
  std::vector<double> cumulative_path_length() const;
};

PointCloud transform_cloud(const PointCloud& cloud, const Se3Pose& pose);
std::vector<Vec3> positions_of(const PointCloud& cloud);
std::vector<Vec3> transform_positions(const std::vector<Vec3>& pts, const Se3Pose& pose);

// TUM trajectory text: "timestamp tx ty tz qx qy qz qw", 9 significant digits.
std::string to_tum(const Trajectory& traj);
void save_tum(const Trajectory& traj, const std::string& path);
Trajectory load_tum(const std::string& path);

// Uniform hash grid over 3D points for fixed-radius neighbor queries.
// Query results are index-sorted, so traversal order is deterministic.
class SpatialGrid {
 public:
  SpatialGrid(const std::vector<Vec3>* points, double cell_size);

  // Indices of stored points within `radius` of p (exact distance check).
  void query(const Vec3& p, double radius, std::vector<int>& out) const;
  bool has_neighbor_within(const Vec3& p, double radius) const;

 private:
  struct CellHash {
    std::size_t operator()(std::int64_t k) const noexcept {
      std::uint64_t z = static_cast<std::uint64_t>(k) * 0x9e3779b97f4a7c15ULL;
      return static_cast<std::size_t>(z ^ (z >> 31));
    }
  };
  std::int64_t key_of(const Vec3& p) const;

  const std::vector<Vec3>* points_;
  double cell_;
  std::unordered_map<std::int64_t, std::vector<int>, CellHash> cells_;
};

}  // namespace radarloop
