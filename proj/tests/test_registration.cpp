#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "radarloop/errors.hpp"
#include "radarloop/keyframing.hpp"
#include "radarloop/registration.hpp"
#include "radarloop/rng.hpp"
#include "radarloop/sim.hpp"

using namespace radarloop;

namespace {

std::vector<SurfacePoint> transform_surface(const std::vector<SurfacePoint>& sps,
                                            const Se3Pose& T) {
  const Mat3 R = T.rotation_matrix();
  std::vector<SurfacePoint> out(sps.size());
  for (std::size_t i = 0; i < sps.size(); ++i)
    out[i] = {T.apply(sps[i].mean), R * sps[i].normal, sps[i].weight};
  return out;
}

// Ground patch plus two perpendicular walls and an oblique panel; constrains
// all six degrees of freedom.
std::vector<SurfacePoint> room_scene(Rng& rng) {
  std::vector<SurfacePoint> sps;
  for (int i = 0; i < 60; ++i) {
    Vec3 mu(rng.uniform(-9.0, 9.0), rng.uniform(-7.0, 7.0), 0.0);
    sps.push_back({mu, Vec3(0, 0, 1), 8});
  }
  for (int i = 0; i < 40; ++i) {
    Vec3 mu(10.0, rng.uniform(-7.0, 7.0), rng.uniform(0.2, 4.0));
    sps.push_back({mu, Vec3(-1, 0, 0), 8});
  }
  for (int i = 0; i < 40; ++i) {
    Vec3 mu(rng.uniform(-9.0, 9.0), 8.0, rng.uniform(0.2, 4.0));
    sps.push_back({mu, Vec3(0, -1, 0), 8});
  }
  const Vec3 pn = Vec3(1, 1, 0.3).normalized();
  for (int i = 0; i < 25; ++i) {
    Vec3 in_plane = Vec3(rng.normal(), rng.normal(), rng.normal());
    in_plane -= pn * pn.dot(in_plane);
    sps.push_back({Vec3(-8, -6, 2) + 2.0 * in_plane, pn, 8});
  }
  return sps;
}

std::vector<SurfacePoint> tunnel_scene() {
  WorldModel world = generate_world(7, "tunnel");
  SensorModel sensor;
  sensor.range_sigma = 0.0;
  sensor.angular_sigma_deg = 0.0;
  sensor.doppler_sigma = 0.0;
  sensor.intensity_sigma = 0.0;
  sensor.dropout_prob = 0.0;
  sensor.outlier_fraction = 0.0;
  Se3Pose pose;
  pose.translation = Vec3(34.0, 24.0, 1.0);
  pose.rotation = yaw_quat(M_PI / 4.0);
  Rng rng(42);
  RadarScan scan = simulate_scan(world, pose, Vec3::Zero(), sensor, rng);
  return compute_surface_points(scan.points, 1.0, 6);
}

Se3Pose make_offset(double tx, double ty, double yaw_deg) {
  Se3Pose d;
  d.translation = Vec3(tx, ty, 0.0);
  d.rotation = yaw_quat(yaw_deg * M_PI / 180.0);
  return d;
}

double pose_gap_translation(const Se3Pose& a, const Se3Pose& b) {
  return (a.translation - b.translation).norm();
}

double pose_gap_rotation_deg(const Se3Pose& a, const Se3Pose& b) {
  return rotation_distance(a.rotation, b.rotation) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("identical sets from identity init return identity with zero cost") {
  Rng rng(11);
  auto sps = room_scene(rng);
  RegistrationConfig cfg;
  auto res = register_p2d(sps, sps, Se3Pose::identity(), cfg);
  CHECK(res.converged);
  CHECK(pose_gap_translation(res.pose, Se3Pose::identity()) < 1e-9);
  CHECK(pose_gap_rotation_deg(res.pose, Se3Pose::identity()) < 1e-9);
  CHECK(res.final_cost < 1e-12);
  CHECK(res.correspondences == static_cast<int>(sps.size()));
  CHECK(res.average_set_size == doctest::Approx(static_cast<double>(sps.size())));
}

TEST_CASE("half-meter five-degree offset is recovered on a synthetic room") {
  Rng rng(12);
  auto query = room_scene(rng);
  const Se3Pose d = make_offset(0.3, -0.4, 5.0);
  auto candidate = transform_surface(query, d);
  RegistrationConfig cfg;
  auto res = register_p2d(query, candidate, Se3Pose::identity(), cfg);
  CHECK(res.converged);
  CHECK(pose_gap_translation(res.pose, d) < 1e-3);
  CHECK(pose_gap_rotation_deg(res.pose, d) < 0.1);
}

TEST_CASE("half-meter five-degree offset is recovered on a simulated corner scan") {
  auto query = tunnel_scene();
  REQUIRE(query.size() >= 20);
  const Se3Pose d = make_offset(0.5, 0.0, 5.0);
  auto candidate = transform_surface(query, d);
  RegistrationConfig cfg;
  auto res = register_p2d(query, candidate, Se3Pose::identity(), cfg);
  CHECK(res.converged);
  CHECK(pose_gap_translation(res.pose, d) < 1e-3);
  CHECK(pose_gap_rotation_deg(res.pose, d) < 0.1);
}

TEST_CASE("clouds one hundred meters apart raise the no-overlap error") {
  Rng rng(13);
  auto query = room_scene(rng);
  Se3Pose far;
  far.translation = Vec3(100.0, 0.0, 0.0);
  auto candidate = transform_surface(query, far);
  RegistrationConfig cfg;
  CHECK_THROWS_AS(register_p2d(query, candidate, Se3Pose::identity(), cfg), NoOverlapError);
}

TEST_CASE("objective is non-increasing across accepted steps") {
  Rng rng(14);
  auto query = room_scene(rng);
  const Se3Pose d = make_offset(0.4, 0.3, 8.0);
  auto candidate = transform_surface(query, d);
  RegistrationConfig cfg;
  auto res = register_p2d(query, candidate, Se3Pose::identity(), cfg);
  REQUIRE(res.cost_history.size() >= 2);
  for (std::size_t i = 1; i < res.cost_history.size(); ++i)
    CHECK(res.cost_history[i] <= res.cost_history[i - 1] + 1e-12);
  CHECK(res.final_cost >= 0.0);
  CHECK(res.correspondences >= 0);
}

TEST_CASE("a common rotation of both sets conjugates the result") {
  Rng rng(15);
  auto query = room_scene(rng);
  const Se3Pose d = make_offset(0.3, -0.2, 4.0);
  auto candidate = transform_surface(query, d);
  RegistrationConfig cfg;

  Se3Pose init;
  init.translation = Vec3(0.05, -0.04, 0.02);
  init.rotation = yaw_quat(0.01);
  auto base = register_p2d(query, candidate, init, cfg);

  Se3Pose g;
  g.rotation = Quat(Eigen::AngleAxisd(0.7, Vec3(0.2, -0.3, 0.93).normalized()));
  auto rq = transform_surface(query, g);
  auto rc = transform_surface(candidate, g);
  const Se3Pose init_conj = g * init * g.inverse();
  auto rotated = register_p2d(rq, rc, init_conj, cfg);

  const Se3Pose expected = g * base.pose * g.inverse();
  CHECK(pose_gap_translation(rotated.pose, expected) < 1e-6);
  CHECK(rotation_distance(rotated.pose.rotation, expected.rotation) < 1e-6);
}

TEST_CASE("measures evaluated at a fixed pose match a registration endpoint") {
  Rng rng(16);
  auto query = room_scene(rng);
  const Se3Pose d = make_offset(0.2, 0.1, 3.0);
  auto candidate = transform_surface(query, d);
  RegistrationConfig cfg;
  auto res = register_p2d(query, candidate, Se3Pose::identity(), cfg);
  auto meas = evaluate_p2d_measures(query, candidate, res.pose, cfg);
  CHECK(meas.cost == doctest::Approx(res.final_cost).epsilon(1e-9));
  CHECK(meas.correspondences == res.correspondences);
  CHECK(meas.average_set_size == doctest::Approx(res.average_set_size));

  Se3Pose far;
  far.translation = Vec3(300.0, 0.0, 0.0);
  auto empty = evaluate_p2d_measures(query, candidate, far, cfg);
  CHECK(empty.correspondences == 0);
  CHECK(empty.cost > 0.0);
}

TEST_CASE("analytic Jacobian matches central differences on random instances") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    CHECK(registration_jacobian_check(seed) < 1e-4);
}

TEST_CASE("finite-difference step sizes 1e-6 and 1e-7 agree") {
  const double a = registration_jacobian_check(99, 1e-6);
  const double b = registration_jacobian_check(99, 1e-7);
  CHECK(a < 1e-4);
  CHECK(b < 1e-4);
  CHECK(std::abs(a - b) < 1e-5);
}

TEST_CASE("zero-residual instance keeps the Jacobian finite") {
  Rng rng(17);
  auto query = room_scene(rng);
  const Se3Pose pose = Se3Pose::identity();
  for (const auto& sp : query) {
    const Vec3 y = pose.apply(sp.mean);
    Vec6 J;
    J.head<3>() = sp.normal;
    J.tail<3>() = y.cross(sp.normal);
    CHECK(J.allFinite());
    for (int k = 0; k < 6; ++k) {
      Vec6 dxi = Vec6::Zero();
      dxi[k] = 1e-6;
      auto resid = [&](const Se3Pose& T) { return sp.normal.dot(T.apply(sp.mean) - sp.mean); };
      const double fd =
          (resid(se3_exp(dxi) * pose) - resid(se3_exp(Vec6(-dxi)) * pose)) / 2e-6;
      CHECK(std::isfinite(fd));
      CHECK(std::abs(fd - J[k]) < 1e-4 * std::max(1.0, std::abs(J[k])));
    }
  }
}

TEST_CASE("a lone plane leaves unconstrained directions at the initial guess") {
  std::vector<SurfacePoint> plane;
  Rng rng(18);
  for (int i = 0; i < 50; ++i)
    plane.push_back({Vec3(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), 0.0), Vec3(0, 0, 1), 8});
  Se3Pose d;
  d.translation = Vec3(0, 0, 0.4);
  auto candidate = transform_surface(plane, d);
  RegistrationConfig cfg;
  auto res = register_p2d(plane, candidate, Se3Pose::identity(), cfg);
  CHECK(std::abs(res.pose.translation.z() - 0.4) < 1e-6);
  CHECK(std::abs(res.pose.translation.x()) < 1e-6);
  CHECK(std::abs(res.pose.translation.y()) < 1e-6);
  CHECK(res.converged);
}
