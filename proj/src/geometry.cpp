#include "radarloop/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace radarloop {

Se3Pose se3_compose(const Se3Pose& a, const Se3Pose& b) {
  Se3Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  out.rotation.normalize();
  return out;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 s = skew(phi);
  if (t < 1e-8) return Mat3::Identity() + s + 0.5 * s * s;
  return Mat3::Identity() + (std::sin(t) / t) * s + ((1.0 - std::cos(t)) / (t * t)) * s * s;
}

Vec3 quat_log(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double n = q.vec().norm();
  if (n < 1e-12) return 2.0 * q.vec();
  return (2.0 * std::atan2(n, q.w()) / n) * q.vec();
}

Vec3 so3_log(const Mat3& rot) { return quat_log(Quat(rot)); }

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 s = skew(phi);
  if (t < 1e-6) return Mat3::Identity() + 0.5 * s + (1.0 / 6.0) * s * s;
  const double t2 = t * t;
  return Mat3::Identity() + ((1.0 - std::cos(t)) / t2) * s +
         ((t - std::sin(t)) / (t2 * t)) * s * s;
}

Mat3 so3_left_jacobian_inv(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 s = skew(phi);
  if (t < 1e-6) return Mat3::Identity() - 0.5 * s + (1.0 / 12.0) * s * s;
  const double c = 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
  return Mat3::Identity() - 0.5 * s + c * s * s;
}

Se3Pose se3_exp(const Vec6& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  Se3Pose out;
  out.rotation = Quat(so3_exp(phi));
  out.translation = so3_left_jacobian(phi) * rho;
  out.rotation.normalize();
  return out;
}

Vec6 se3_log(const Se3Pose& pose) {
  if (pose.rotation_angle() > M_PI - 1e-9)
    throw AmbiguousLogError("se3_log: rotation angle at pi is ambiguous");
  const Vec3 phi = quat_log(pose.rotation);
  Vec6 xi;
  xi.head<3>() = so3_left_jacobian_inv(phi) * pose.translation;
  xi.tail<3>() = phi;
  return xi;
}

Mat6 se3_adjoint(const Se3Pose& pose) {
  const Mat3 r = pose.rotation_matrix();
  Mat6 adj = Mat6::Zero();
  adj.topLeftCorner<3, 3>() = r;
  adj.topRightCorner<3, 3>() = skew(pose.translation) * r;
  adj.bottomRightCorner<3, 3>() = r;
  return adj;
}

// Coupling block of the SE(3) left Jacobian (Barfoot's Q matrix).
static Mat3 se3_q_block(const Vec3& rho, const Vec3& phi) {
  const Mat3 sr = skew(rho);
  const Mat3 sp = skew(phi);
  const double t = phi.norm();
  double m1, m2, m3;
  if (t < 1e-4) {
    const double t2 = t * t;
    m1 = 1.0 / 6.0 - t2 / 120.0;
    m2 = 1.0 / 24.0 - t2 / 720.0;
    m3 = -1.0 / 120.0 + t2 / 5040.0;
  } else {
    const double t2 = t * t, t3 = t2 * t;
    const double st = std::sin(t), ct = std::cos(t);
    m1 = (t - st) / t3;
    m2 = (ct - 1.0 + t2 / 2.0) / (t3 * t);
    m3 = (t - st - t3 / 6.0) / (t3 * t2);
  }
  const Mat3 spsr = sp * sr;
  const Mat3 srsp = sr * sp;
  return 0.5 * sr + m1 * (spsr + srsp + sp * srsp) +
         m2 * (sp * spsr + srsp * sp - 3.0 * spsr * sp) +
         0.5 * (m2 + 3.0 * m3) * (spsr * sp * sp + sp * sp * srsp);
}

Mat6 se3_left_jacobian_inv(const Vec6& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  const Mat3 jinv = so3_left_jacobian_inv(phi);
  const Mat3 q = se3_q_block(rho, phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = jinv;
  out.topRightCorner<3, 3>() = -jinv * q * jinv;
  out.bottomRightCorner<3, 3>() = jinv;
  return out;
}

Mat6 se3_right_jacobian_inv(const Vec6& xi) { return se3_left_jacobian_inv(-xi); }

double yaw_of(const Quat& q) {
  const Mat3 r = q.toRotationMatrix();
  return std::atan2(r(1, 0), r(0, 0));
}

Quat yaw_quat(double yaw) { return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())); }

double rotation_distance(const Quat& a, const Quat& b) {
  Quat d = a.conjugate() * b;
  if (d.w() < 0.0) d.coeffs() = -d.coeffs();
  return 2.0 * std::atan2(d.vec().norm(), d.w());
}

Quat leveling_rotation(const Quat& sensor_to_world) {
  Quat q = yaw_quat(yaw_of(sensor_to_world)).conjugate() * sensor_to_world;
  q.normalize();
  return q;
}

std::vector<double> Trajectory::cumulative_path_length() const {
  std::vector<double> out(poses.size(), 0.0);
  for (std::size_t i = 1; i < poses.size(); ++i)
    out[i] = out[i - 1] + (poses[i].pose.translation - poses[i - 1].pose.translation).norm();
  return out;
}

PointCloud transform_cloud(const PointCloud& cloud, const Se3Pose& pose) {
  PointCloud out = cloud;
  for (auto& p : out) p.position = pose.apply(p.position);
  return out;
}

std::vector<Vec3> positions_of(const PointCloud& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(p.position);
  return out;
}

std::vector<Vec3> transform_positions(const std::vector<Vec3>& pts, const Se3Pose& pose) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(pose.apply(p));
  return out;
}

std::string to_tum(const Trajectory& traj) {
  std::string out;
  char buf[256];
  for (const auto& tp : traj.poses) {
    const Vec3& t = tp.pose.translation;
    Quat q = tp.pose.rotation.normalized();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n", tp.timestamp,
                  t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    out += buf;
  }
  return out;
}

void save_tum(const Trajectory& traj, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << to_tum(traj);
}

Trajectory load_tum(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open trajectory file: " + path);
  Trajectory traj;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TimedPose tp;
    double qx, qy, qz, qw;
    if (!(ss >> tp.timestamp >> tp.pose.translation.x() >> tp.pose.translation.y() >>
          tp.pose.translation.z() >> qx >> qy >> qz >> qw))
      throw DataError("malformed trajectory line: " + line);
    tp.pose.rotation = Quat(qw, qx, qy, qz);
    tp.pose.normalize();
    traj.poses.push_back(tp);
  }
  return traj;
}

namespace {
constexpr std::int64_t kCoordMask = (1LL << 21) - 1;
}

SpatialGrid::SpatialGrid(const std::vector<Vec3>* points, double cell_size)
    : points_(points), cell_(cell_size) {
  for (int i = 0; i < static_cast<int>(points_->size()); ++i)
    cells_[key_of((*points_)[i])].push_back(i);
}

std::int64_t SpatialGrid::key_of(const Vec3& p) const {
  const std::int64_t ix = static_cast<std::int64_t>(std::floor(p.x() / cell_));
  const std::int64_t iy = static_cast<std::int64_t>(std::floor(p.y() / cell_));
  const std::int64_t iz = static_cast<std::int64_t>(std::floor(p.z() / cell_));
  return (ix & kCoordMask) | ((iy & kCoordMask) << 21) | ((iz & kCoordMask) << 42);
}

void SpatialGrid::query(const Vec3& p, double radius, std::vector<int>& out) const {
  out.clear();
  const double r2 = radius * radius;
  const std::int64_t x0 = static_cast<std::int64_t>(std::floor((p.x() - radius) / cell_));
  const std::int64_t x1 = static_cast<std::int64_t>(std::floor((p.x() + radius) / cell_));
  const std::int64_t y0 = static_cast<std::int64_t>(std::floor((p.y() - radius) / cell_));
  const std::int64_t y1 = static_cast<std::int64_t>(std::floor((p.y() + radius) / cell_));
  const std::int64_t z0 = static_cast<std::int64_t>(std::floor((p.z() - radius) / cell_));
  const std::int64_t z1 = static_cast<std::int64_t>(std::floor((p.z() + radius) / cell_));
  for (std::int64_t ix = x0; ix <= x1; ++ix)
    for (std::int64_t iy = y0; iy <= y1; ++iy)
      for (std::int64_t iz = z0; iz <= z1; ++iz) {
        const std::int64_t key =
            (ix & kCoordMask) | ((iy & kCoordMask) << 21) | ((iz & kCoordMask) << 42);
        auto it = cells_.find(key);
        if (it == cells_.end()) continue;
        for (int idx : it->second)
          if (((*points_)[idx] - p).squaredNorm() <= r2) out.push_back(idx);
      }
  std::sort(out.begin(), out.end());
}

bool SpatialGrid::has_neighbor_within(const Vec3& p, double radius) const {
  const double r2 = radius * radius;
  const std::int64_t x0 = static_cast<std::int64_t>(std::floor((p.x() - radius) / cell_));
  const std::int64_t x1 = static_cast<std::int64_t>(std::floor((p.x() + radius) / cell_));
  const std::int64_t y0 = static_cast<std::int64_t>(std::floor((p.y() - radius) / cell_));
  const std::int64_t y1 = static_cast<std::int64_t>(std::floor((p.y() + radius) / cell_));
  const std::int64_t z0 = static_cast<std::int64_t>(std::floor((p.z() - radius) / cell_));
  const std::int64_t z1 = static_cast<std::int64_t>(std::floor((p.z() + radius) / cell_));
  for (std::int64_t ix = x0; ix <= x1; ++ix)
    for (std::int64_t iy = y0; iy <= y1; ++iy)
      for (std::int64_t iz = z0; iz <= z1; ++iz) {
        const std::int64_t key =
            (ix & kCoordMask) | ((iy & kCoordMask) << 21) | ((iz & kCoordMask) << 42);
        auto it = cells_.find(key);
        if (it == cells_.end()) continue;
        for (int idx : it->second)
          if (((*points_)[idx] - p).squaredNorm() <= r2) return true;
      }
  return false;
}

}  // namespace radarloop
