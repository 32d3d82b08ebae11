#include "radarloop/sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace radarloop {

namespace {

constexpr double kDeg = M_PI / 180.0;

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

// Distance from p to the closed polyline through pts (xy only).
double polyline_distance_xy(const std::vector<Vec3>& pts, const Vec3& p) {
  double best = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3& a = pts[i];
    const Vec3& b = pts[(i + 1) % pts.size()];
    const Eigen::Vector2d ab(b.x() - a.x(), b.y() - a.y());
    const Eigen::Vector2d ap(p.x() - a.x(), p.y() - a.y());
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp(ap.dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (ap - s * ab).norm());
  }
  return best;
}

void add_wall_panels(WorldModel& world, const Vec3& from, const Vec3& to, double height,
                     double panel_len, Rng& rng) {
  const Vec3 dir = to - from;
  const double len = dir.norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / panel_len)));
  for (int i = 0; i < n; ++i) {
    const double a = static_cast<double>(i) / n;
    const double b = static_cast<double>(i + 1) / n;
    RectSurface r;
    r.origin = from + a * dir;
    r.edge_u = (b - a) * dir;
    r.edge_v = Vec3(0.0, 0.0, height);
    r.reflectivity = rng.uniform(5000.0, 20000.0);
    world.rects.push_back(r);
  }
}

WorldModel make_tunnel(std::uint64_t seed) {
  WorldModel world;
  world.scenario = "tunnel";
  world.seed = seed;
  Rng rng = Rng::child(seed, 101);

  const double ox = 60.0, oy = 25.0;  // outer half extents
  const double width = 8.0, height = 6.0;
  const double ix = ox - width, iy = oy - width;

  const Vec3 outer[4] = {{ox, -oy, 0}, {ox, oy, 0}, {-ox, oy, 0}, {-ox, -oy, 0}};
  const Vec3 inner[4] = {{ix, -iy, 0}, {ix, iy, 0}, {-ix, iy, 0}, {-ix, -iy, 0}};
  for (int i = 0; i < 4; ++i) {
    add_wall_panels(world, outer[i], outer[(i + 1) % 4], height, 10.0, rng);
    add_wall_panels(world, inner[i], inner[(i + 1) % 4], height, 8.0, rng);
  }

  RectSurface ceiling;
  ceiling.origin = Vec3(-ox, -oy, height);
  ceiling.edge_u = Vec3(2.0 * ox, 0.0, 0.0);
  ceiling.edge_v = Vec3(0.0, 2.0 * oy, 0.0);
  ceiling.reflectivity = rng.uniform(3000.0, 6000.0);
  world.rects.push_back(ceiling);

  // Wall-mounted cabinets and duct boxes; their uneven spacing breaks the
  // longitudinal symmetry of the straight sections.
  auto add_box = [&](const Vec3& wall_pt, const Vec3& dir, const Vec3& inward) {
    const double w = rng.uniform(0.8, 2.0);
    const double d = rng.uniform(0.4, 1.0);
    const double z0 = rng.uniform(0.0, 2.0);
    const double h = rng.uniform(1.0, 2.5);
    const double refl = rng.uniform(12000.0, 35000.0);
    const Vec3 base = wall_pt - 0.5 * w * dir + Vec3(0.0, 0.0, z0);
    RectSurface face;
    face.origin = base + d * inward;
    face.edge_u = w * dir;
    face.edge_v = Vec3(0.0, 0.0, h);
    face.reflectivity = refl;
    RectSurface side = face;
    side.origin = base;
    side.edge_u = d * inward;
    world.rects.push_back(face);
    world.rects.push_back(side);
    side.origin = base + w * dir;
    world.rects.push_back(side);
  };
  for (int i = 0; i < 4; ++i) {
    const Vec3 od = (outer[(i + 1) % 4] - outer[i]).normalized();
    const Vec3 on(-od.y(), od.x(), 0.0);
    const double olen = (outer[(i + 1) % 4] - outer[i]).norm();
    for (double s = 5.0; s < olen - 5.0; s += rng.uniform(6.0, 11.0))
      add_box(outer[i] + s * od, od, on);
    const Vec3 id = (inner[(i + 1) % 4] - inner[i]).normalized();
    const Vec3 in(id.y(), -id.x(), 0.0);
    const double ilen = (inner[(i + 1) % 4] - inner[i]).norm();
    for (double s = 4.0; s < ilen - 4.0; s += rng.uniform(6.0, 11.0))
      add_box(inner[i] + s * id, id, in);
  }

  // Sparse pillars along the corridor centerline, alternating sides.
  const double cx = ox - width / 2.0, cy = oy - width / 2.0;
  const std::vector<Vec3> center = {{cx, -cy, 0}, {cx, cy, 0}, {-cx, cy, 0}, {-cx, -cy, 0}};
  double spacing = 15.0;
  int count = 0;
  for (int leg = 0; leg < 4; ++leg) {
    const Vec3& a = center[leg];
    const Vec3& b = center[(leg + 1) % 4];
    const Vec3 dir = (b - a).normalized();
    const Vec3 side(-dir.y(), dir.x(), 0.0);
    const double len = (b - a).norm();
    for (double s = spacing / 2.0; s < len - 2.0; s += spacing) {
      CylinderSurface c;
      const double along = s + rng.uniform(-2.0, 2.0);
      const double lateral = (count % 2 == 0 ? 2.5 : -2.5) + rng.uniform(-0.3, 0.3);
      c.base = a + along * dir + lateral * side;
      c.base.z() = 0.0;
      c.radius = rng.uniform(0.3, 0.45);
      c.height = 4.0;
      c.reflectivity = rng.uniform(25000.0, 45000.0);
      world.cylinders.push_back(c);
      ++count;
    }
  }

  world.ground_reflectivity = 2500.0;
  world.bounds_min = Vec3(-ox - 1.0, -oy - 1.0, -1.0);
  world.bounds_max = Vec3(ox + 1.0, oy + 1.0, height + 1.0);
  // Straight north-corridor drive, stopping short of the corner pockets.
  world.canonical_waypoints = {{cx - 4.0, cy, 1.0}, {-cx + 4.0, cy, 1.0}};
  world.loop_waypoints = {{cx, -cy, 1.0}, {cx, cy, 1.0}, {-cx, cy, 1.0}, {-cx, -cy, 1.0}};
  return world;
}

WorldModel make_forest(std::uint64_t seed) {
  WorldModel world;
  world.scenario = "forest";
  world.seed = seed;
  Rng rng = Rng::child(seed, 202);

  world.canonical_waypoints = {{30, -30, 1.0}, {30, 30, 1.0}, {-30, 30, 1.0}, {-30, -30, 1.0}};
  world.loop_waypoints = world.canonical_waypoints;

  const int target = 70;
  for (int i = 0; i < target; ++i) {
    CylinderSurface c;
    for (int attempt = 0; attempt < 200; ++attempt) {
      c.base = Vec3(rng.uniform(-48.0, 48.0), rng.uniform(-48.0, 48.0), 0.0);
      if (polyline_distance_xy(world.canonical_waypoints, c.base) > 3.0) break;
    }
    c.radius = rng.uniform(0.25, 0.7);
    c.height = rng.uniform(5.0, 12.0);
    c.reflectivity = rng.uniform(15000.0, 45000.0);
    world.cylinders.push_back(c);
  }

  world.ground_reflectivity = 2500.0;
  world.bounds_min = Vec3(-50.0, -50.0, -1.0);
  world.bounds_max = Vec3(50.0, 50.0, 15.0);
  return world;
}

}  // namespace

WorldModel generate_world(std::uint64_t seed, const std::string& scenario) {
  if (scenario == "tunnel") return make_tunnel(seed);
  if (scenario == "forest") return make_forest(seed);
  throw ConfigError("unknown scenario: " + scenario);
}

std::optional<RayHit> cast_ray(const WorldModel& world, const Vec3& origin, const Vec3& dir,
                               double max_range) {
  double best = max_range;
  double refl = 0.0;
  bool hit = false;
  bool on_ground = false;

  if (world.has_ground && dir.z() < -1e-12) {
    const double t = (world.ground_z - origin.z()) / dir.z();
    if (t > 1e-9 && t <= best) {
      const Vec3 p = origin + t * dir;
      if (p.x() >= world.bounds_min.x() && p.x() <= world.bounds_max.x() &&
          p.y() >= world.bounds_min.y() && p.y() <= world.bounds_max.y()) {
        best = t;
        refl = world.ground_reflectivity;
        hit = true;
        on_ground = true;
      }
    }
  }

  for (const auto& r : world.rects) {
    const Vec3 n = r.edge_u.cross(r.edge_v);
    const double denom = dir.dot(n);
    if (std::abs(denom) < 1e-12) continue;
    const double t = (r.origin - origin).dot(n) / denom;
    if (t <= 1e-9 || t > best) continue;
    const Vec3 p = origin + t * dir - r.origin;
    const double su = p.dot(r.edge_u) / r.edge_u.squaredNorm();
    const double sv = p.dot(r.edge_v) / r.edge_v.squaredNorm();
    if (su < 0.0 || su > 1.0 || sv < 0.0 || sv > 1.0) continue;
    best = t;
    refl = r.reflectivity;
    hit = true;
    on_ground = false;
  }

  for (const auto& c : world.cylinders) {
    const double ox = origin.x() - c.base.x();
    const double oy = origin.y() - c.base.y();
    const double a = dir.x() * dir.x() + dir.y() * dir.y();
    if (a < 1e-12) continue;
    const double b = 2.0 * (ox * dir.x() + oy * dir.y());
    const double cc = ox * ox + oy * oy - c.radius * c.radius;
    const double disc = b * b - 4.0 * a * cc;
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    for (const double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
      if (t <= 1e-9 || t > best) continue;
      const double z = origin.z() + t * dir.z();
      if (z < c.base.z() || z > c.base.z() + c.height) continue;
      best = t;
      refl = c.reflectivity;
      hit = true;
      on_ground = false;
      break;
    }
  }

  if (!hit) return std::nullopt;
  return RayHit{best, refl, on_ground};
}

namespace {

Vec3 ray_direction(double az, double el) {
  return Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
}

}  // namespace

RadarScan simulate_scan(const WorldModel& world, const Se3Pose& sensor_pose,
                        const Vec3& ego_velocity_world, const SensorModel& sensor, Rng& rng) {
  RadarScan scan;
  const Mat3 rot = sensor_pose.rotation_matrix();
  const Vec3 origin = sensor_pose.translation;
  const Vec3 v_sensor = rot.transpose() * ego_velocity_world;
  const double az_max = sensor.azimuth_fov_deg * kDeg;
  const double el_max = sensor.elevation_fov_deg * kDeg;
  const double jitter = sensor.cluster_jitter_deg * kDeg;
  const double ang_sigma = sensor.angular_sigma_deg * kDeg;

  auto emit_detection = [&](double az, double el, const RayHit& hit) {
    if (rng.uniform01() < sensor.dropout_prob) return;
    double r = hit.range + rng.normal(0.0, sensor.range_sigma);
    r = std::clamp(r, sensor.min_range, sensor.max_range);
    const double az_m = std::clamp(az + rng.normal(0.0, ang_sigma), -az_max, az_max);
    const double el_m = std::clamp(el + rng.normal(0.0, ang_sigma), -el_max, el_max);
    RadarPoint pt;
    pt.position = r * ray_direction(az_m, el_m);
    const Vec3 u = pt.position.normalized();
    pt.intensity = hit.reflectivity / std::max(r * r, 1.0) *
                   std::exp(rng.normal(0.0, sensor.intensity_sigma));
    if (rng.uniform01() < sensor.outlier_fraction) {
      pt.doppler = rng.uniform(-sensor.outlier_doppler_range, sensor.outlier_doppler_range);
    } else {
      pt.doppler = -u.dot(v_sensor) + rng.normal(0.0, sensor.doppler_sigma);
    }
    scan.points.push_back(pt);
  };

  // Cluster member rays aim near their anchor; returns landing far from the
  // anchor distance (missed or occluded target) are dropped so the cluster
  // stays on one object.
  auto emit_member = [&](double az, double el, double expected_range) {
    const auto hit = cast_ray(world, origin, rot * ray_direction(az, el), sensor.max_range);
    if (!hit || hit->range < sensor.min_range) return;
    if (std::abs(hit->range - expected_range) > 1.5) return;
    emit_detection(az, el, *hit);
  };

  auto shuffle = [&](auto& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      const int j = std::min(i, static_cast<int>(rng.uniform(0.0, i + 1.0)));
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  };

  // Probe sweep over the full field of view. Detections are then drawn per
  // range cell, which is what a CFAR detector does after normalizing each
  // cell's noise estimate: strong close-by clutter cannot crowd out returns
  // from far cells.
  struct Candidate {
    double az, el;
    RayHit hit;
  };
  const double cell = 2.0;
  const auto n_cells = static_cast<std::size_t>(std::ceil(sensor.max_range / cell));
  std::vector<std::vector<Candidate>> cells(std::max<std::size_t>(n_cells, 1));
  for (int i = 0; i < 8 * sensor.points_per_scan; ++i) {
    const double az = rng.uniform(-az_max, az_max);
    const double el = rng.uniform(-el_max, el_max);
    const auto hit = cast_ray(world, origin, rot * ray_direction(az, el), sensor.max_range);
    if (!hit || hit->range < sensor.min_range || hit->ground) continue;
    const auto b = std::min(cells.size() - 1, static_cast<std::size_t>(hit->range / cell));
    cells[b].push_back({az, el, *hit});
  }
  for (auto& c : cells) shuffle(c);

  const int cluster_rays =
      static_cast<int>(std::lround(sensor.points_per_scan * sensor.cluster_fraction));
  const int n_clusters = sensor.cluster_size > 0 ? cluster_rays / sensor.cluster_size : 0;
  const int n_single = std::max(0, sensor.points_per_scan - n_clusters * sensor.cluster_size);

  std::vector<Candidate> picks;
  std::vector<std::size_t> cursor(cells.size(), 0);
  for (int need = n_clusters + n_single; need > 0;) {
    bool advanced = false;
    for (std::size_t b = 0; b < cells.size() && need > 0; ++b) {
      if (cursor[b] >= cells[b].size()) continue;
      picks.push_back(cells[b][cursor[b]++]);
      --need;
      advanced = true;
    }
    if (!advanced) break;
  }
  shuffle(picks);

  // Strong reflectors return groups of detections, not lone points: the first
  // picks anchor clusters whose member rays scatter tightly around them.
  std::size_t used = 0;
  for (int ci = 0; ci < n_clusters && used < picks.size(); ++ci, ++used) {
    const Candidate& a = picks[used];
    for (int k = 0; k < sensor.cluster_size; ++k) {
      const double az = std::clamp(a.az + rng.normal(0.0, jitter), -az_max, az_max);
      const double el = std::clamp(a.el + rng.normal(0.0, jitter), -el_max, el_max);
      emit_member(az, el, a.hit.range);
    }
  }
  for (; used < picks.size(); ++used)
    emit_detection(picks[used].az, picks[used].el, picks[used].hit);

  // The rough ground scatters back at any incidence and gets its own budget,
  // outside the per-cell draw.
  const int ground_budget = static_cast<int>(std::lround(sensor.ground_return_rate));
  int ground_emitted = 0;
  for (int i = 0; i < 3 * ground_budget && ground_emitted < ground_budget; ++i) {
    const double az = rng.uniform(-az_max, az_max);
    const double el = rng.uniform(-el_max, -el_max / 3.0);
    const auto hit = cast_ray(world, origin, rot * ray_direction(az, el), sensor.max_range);
    if (!hit || !hit->ground || hit->range < sensor.min_range) continue;
    emit_detection(az, el, *hit);
    ++ground_emitted;
  }

  return scan;
}

PathSampler PathSampler::build(const PathSpec& spec) {
  if (spec.waypoints.size() < 2) throw ConfigError("path needs at least 2 waypoints");
  std::vector<std::pair<Vec3, Vec3>> legs;
  const auto& w = spec.waypoints;
  if (spec.out_and_back) {
    for (std::size_t i = 0; i + 1 < w.size(); ++i) legs.emplace_back(w[i], w[i + 1]);
    for (std::size_t i = w.size() - 1; i > 0; --i) legs.emplace_back(w[i], w[i - 1]);
  } else {
    const int laps = std::max(1, spec.laps);
    for (int lap = 0; lap < laps; ++lap) {
      for (std::size_t i = 0; i + 1 < w.size(); ++i) legs.emplace_back(w[i], w[i + 1]);
      if (spec.closed) legs.emplace_back(w.back(), w.front());
      if (!spec.closed) break;
    }
  }

  PathSampler out;
  const double turn_rate = spec.turn_rate_deg * kDeg;
  double t = 0.0;
  double heading = 0.0;
  bool first = true;
  for (const auto& [from, to] : legs) {
    const Vec3 d = to - from;
    const double len = d.norm();
    if (len < 1e-12) continue;
    const double leg_heading = std::atan2(d.y(), d.x());
    if (first) {
      heading = leg_heading;
      first = false;
    } else {
      const double delta = wrap_angle(leg_heading - heading);
      if (std::abs(delta) > 1e-12) {
        Segment turn;
        turn.turning = true;
        turn.t0 = t;
        turn.t1 = t + std::abs(delta) / turn_rate;
        turn.p0 = turn.p1 = from;
        turn.h0 = heading;
        turn.h1 = heading + delta;
        out.segments_.push_back(turn);
        t = turn.t1;
        heading = turn.h1;
      }
    }
    Segment seg;
    seg.turning = false;
    seg.t0 = t;
    seg.t1 = t + len / spec.speed;
    seg.p0 = from;
    seg.p1 = to;
    seg.h0 = seg.h1 = heading;
    out.segments_.push_back(seg);
    t = seg.t1;
  }
  if (out.segments_.empty()) throw ConfigError("path has zero length");
  out.total_time_ = t;
  return out;
}

Se3Pose PathSampler::pose_at(double t) const {
  const Segment* seg = &segments_.back();
  for (const auto& s : segments_) {
    if (t < s.t1) {
      seg = &s;
      break;
    }
  }
  const double a =
      seg->t1 > seg->t0 ? std::clamp((t - seg->t0) / (seg->t1 - seg->t0), 0.0, 1.0) : 0.0;
  Se3Pose pose;
  pose.translation = seg->p0 + a * (seg->p1 - seg->p0);
  pose.rotation = yaw_quat(seg->h0 + a * (seg->h1 - seg->h0));
  return pose;
}

Vec3 PathSampler::velocity_at(double t) const {
  if (t >= total_time_) return Vec3::Zero();
  const Segment* seg = &segments_.back();
  for (const auto& s : segments_) {
    if (t < s.t1) {
      seg = &s;
      break;
    }
  }
  if (seg->turning) return Vec3::Zero();
  const double dur = seg->t1 - seg->t0;
  if (dur <= 0.0) return Vec3::Zero();
  return (seg->p1 - seg->p0) / dur;
}

SequenceData generate_sequence(const WorldModel& world, const PathSpec& path,
                               const SensorModel& sensor, double rate_hz, std::uint64_t seed) {
  if (rate_hz <= 0.0) throw ConfigError("scan rate must be positive");
  const PathSampler sampler = PathSampler::build(path);
  int n = static_cast<int>(std::llround(sampler.total_time() * rate_hz));
  n = std::max(n, 1);

  SequenceData seq;
  Rng imu_rng = Rng::child(seed, 1000003);
  const double drift_sigma = path.imu_drift_rate_deg * kDeg;
  Mat3 imu_err = Mat3::Identity();
  double t_prev = 0.0;

  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / rate_hz;
    const Se3Pose gt = sampler.pose_at(t);
    for (int d = 0; d < 3; ++d) {
      const double margin = 0.5;
      if (gt.translation(d) < world.bounds_min(d) - margin ||
          gt.translation(d) > world.bounds_max(d) + margin)
        throw DataError("path leaves world bounds");
    }
    const Vec3 vel = sampler.velocity_at(t);

    if (k > 0) {
      const double sdt = std::sqrt(t - t_prev);
      const Vec3 noise(imu_rng.normal(0.0, drift_sigma / 4.0 * sdt),
                       imu_rng.normal(0.0, drift_sigma / 4.0 * sdt),
                       imu_rng.normal(0.0, drift_sigma * sdt));
      imu_err = so3_exp(noise) * imu_err;
    }
    t_prev = t;

    Rng scan_rng = Rng::child(seed, 2000000 + static_cast<std::uint64_t>(k));
    RadarScan scan = simulate_scan(world, gt, vel, sensor, scan_rng);
    scan.timestamp = t;
    scan.imu_orientation = Quat(imu_err) * gt.rotation;
    scan.imu_orientation.normalize();

    seq.scans.push_back(std::move(scan));
    seq.ground_truth.push_back(t, gt);
    seq.gt_velocities.push_back(vel);
  }
  return seq;
}

void save_scan_csv(const PointCloud& cloud, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot open for writing: " + path);
  std::fputs("x,y,z,intensity,doppler\n", f);
  for (const auto& p : cloud)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.position.x(), p.position.y(),
                 p.position.z(), p.intensity, p.doppler);
  std::fclose(f);
}

PointCloud load_scan_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open scan file: " + path);
  PointCloud cloud;
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty scan file: " + path);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    RadarPoint p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &p.position.x(), &p.position.y(),
                    &p.position.z(), &p.intensity, &p.doppler) != 5)
      throw DataError("malformed scan line: " + line);
    cloud.push_back(p);
  }
  return cloud;
}

void save_dataset(const SequenceData& seq, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "scans");
  nlohmann::json manifest;
  manifest["scans"] = nlohmann::json::array();
  char name[64];
  for (std::size_t i = 0; i < seq.scans.size(); ++i) {
    std::snprintf(name, sizeof(name), "scans/%06zu.csv", i);
    save_scan_csv(seq.scans[i].points, (fs::path(dir) / name).string());
    const Quat& q = seq.scans[i].imu_orientation;
    nlohmann::json entry;
    entry["file"] = name;
    entry["timestamp"] = seq.scans[i].timestamp;
    entry["imu"] = {q.x(), q.y(), q.z(), q.w()};
    if (i < seq.gt_velocities.size()) {
      const Vec3& v = seq.gt_velocities[i];
      entry["gt_velocity"] = {v.x(), v.y(), v.z()};
    }
    manifest["scans"].push_back(entry);
  }
  save_tum(seq.ground_truth, (fs::path(dir) / "gt.tum").string());
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw DataError("cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";
}

SequenceData load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw DataError("missing manifest.json in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const std::exception& e) {
    throw DataError(std::string("bad manifest.json: ") + e.what());
  }
  SequenceData seq;
  seq.ground_truth = load_tum((fs::path(dir) / "gt.tum").string());
  for (const auto& entry : manifest.at("scans")) {
    RadarScan scan;
    scan.points = load_scan_csv((fs::path(dir) / entry.at("file").get<std::string>()).string());
    scan.timestamp = entry.at("timestamp").get<double>();
    const auto& q = entry.at("imu");
    scan.imu_orientation = Quat(q[3].get<double>(), q[0].get<double>(), q[1].get<double>(),
                                q[2].get<double>());
    scan.imu_orientation.normalize();
    if (entry.contains("gt_velocity")) {
      const auto& v = entry["gt_velocity"];
      seq.gt_velocities.emplace_back(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    } else {
      seq.gt_velocities.emplace_back(0.0, 0.0, 0.0);
    }
    seq.scans.push_back(std::move(scan));
  }
  if (seq.ground_truth.size() != seq.scans.size())
    throw DataError("manifest scan count does not match gt.tum");
  return seq;
}

}  // namespace radarloop
