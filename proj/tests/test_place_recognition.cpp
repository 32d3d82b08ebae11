#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "radarloop/errors.hpp"
#include "radarloop/odometry.hpp"
#include "radarloop/rng.hpp"
#include "radarloop/scan_context.hpp"
#include "radarloop/sim.hpp"

using namespace radarloop;

namespace {

RadarPoint at(double x, double y, double z, double intensity) {
  RadarPoint p;
  p.position = Vec3(x, y, z);
  p.intensity = intensity;
  p.doppler = 0.0;
  return p;
}

// Points placed away from bin boundaries so exact-rotation tests are stable.
PointCloud boundary_safe_cloud(Rng& rng, const DescriptorConfig& cfg, int n) {
  const double ring_width = cfg.max_range / cfg.n_ring;
  const double sector_width = 2.0 * M_PI / cfg.n_sec;
  PointCloud cloud;
  for (int i = 0; i < n; ++i) {
    const double r = (rng.uniform_index(static_cast<std::uint64_t>(cfg.n_ring)) + 0.5) *
                     ring_width * rng.uniform(0.9, 1.1);
    const double az =
        -M_PI + (rng.uniform_index(static_cast<std::uint64_t>(cfg.n_sec)) + 0.5) * sector_width +
        rng.uniform(-0.3, 0.3) * sector_width;
    cloud.push_back(at(r * std::cos(az), r * std::sin(az), rng.uniform(0.0, 2.0),
                       rng.uniform(100.0, 5000.0)));
  }
  return cloud;
}

ScanContextDescriptor random_descriptor(Rng& rng, int n_ring, int n_sec, double empty_prob) {
  ScanContextDescriptor d;
  d.cells.resize(n_ring, n_sec);
  for (int i = 0; i < n_ring; ++i)
    for (int j = 0; j < n_sec; ++j)
      d.cells(i, j) = rng.uniform01() < empty_prob ? -1.0 : rng.uniform(0.0, 20.0);
  return d;
}

ScanContextDescriptor shifted_by(const ScanContextDescriptor& d, int s) {
  ScanContextDescriptor out = d;
  const int n = d.n_sec();
  for (int j = 0; j < n; ++j) out.cells.col((j + s) % n) = d.cells.col(j);
  return out;
}

// Independent reference: direct double loop over shifts and columns.
DescriptorDistance brute_force_distance(const ScanContextDescriptor& q,
                                        const ScanContextDescriptor& c) {
  const int n = q.n_sec();
  DescriptorDistance best;
  best.distance = 1e300;
  for (int s = 0; s < n; ++s) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      double dot = 0.0, nq = 0.0, nc = 0.0;
      for (int i = 0; i < q.n_ring(); ++i) {
        const double a = q.cells(i, j);
        const double b = c.cells(i, (j + s) % n);
        dot += a * b;
        nq += a * a;
        nc += b * b;
      }
      if (nq == 0.0 || nc == 0.0)
        total += 1.0;
      else
        total += 1.0 - dot / (std::sqrt(nq) * std::sqrt(nc));
    }
    if (total / n < best.distance) {
      best.distance = total / n;
      best.shift = s;
    }
  }
  return best;
}

Keyframe frame_at(int id, double x, double y, double path_length) {
  Keyframe kf;
  kf.id = id;
  kf.odom_pose.translation = Vec3(x, y, 0.0);
  kf.path_length = path_length;
  return kf;
}

}  // namespace

TEST_CASE("an empty cloud maps to an all-empty descriptor") {
  DescriptorConfig cfg;
  auto d = build_descriptor({}, cfg);
  CHECK(d.cells.rows() == 20);
  CHECK(d.cells.cols() == 60);
  CHECK((d.cells.array() == -1.0).all());
}

TEST_CASE("a single point fills exactly one cell with its weighted intensity") {
  DescriptorConfig cfg;
  PointCloud cloud{at(10.5, 0.0, 1.0, 2000.0)};
  auto d = build_descriptor(cloud, cfg);
  // ring 5 of 20 at range 10.5 with 2 m rings; azimuth 0 falls in sector 30.
  CHECK(d.cells(5, 30) == doctest::Approx(2.0));
  int occupied = 0;
  for (int i = 0; i < d.n_ring(); ++i)
    for (int j = 0; j < d.n_sec(); ++j)
      if (d.cells(i, j) != -1.0) ++occupied;
  CHECK(occupied == 1);
  for (int i = 0; i < d.n_ring(); ++i)
    for (int j = 0; j < d.n_sec(); ++j) CHECK((d.cells(i, j) == -1.0 || d.cells(i, j) >= 0.0));
}

TEST_CASE("points beyond the maximum range are discarded") {
  DescriptorConfig cfg;
  PointCloud cloud{at(45.0, 0.0, 0.0, 1000.0)};
  auto d = build_descriptor(cloud, cfg);
  CHECK((d.cells.array() == -1.0).all());
}

TEST_CASE("rotating the cloud by one sector width shifts the columns by one") {
  DescriptorConfig cfg;
  Rng rng(31);
  auto cloud = boundary_safe_cloud(rng, cfg, 400);
  const double sector_width = 2.0 * M_PI / cfg.n_sec;
  PointCloud rotated = cloud;
  const Quat rot = yaw_quat(sector_width);
  for (auto& p : rotated) p.position = rot * p.position;

  auto base = build_descriptor(cloud, cfg);
  auto moved = build_descriptor(rotated, cfg);
  auto expected = shifted_by(base, 1);
  CHECK((moved.cells - expected.cells).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("a descriptor has zero distance to itself at shift zero") {
  Rng rng(32);
  auto d = random_descriptor(rng, 20, 60, 0.5);
  auto res = descriptor_distance(d, d);
  CHECK(res.distance == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(res.shift == 0);
}

TEST_CASE("a circular shift by seven sectors is recovered exactly") {
  Rng rng(33);
  auto d = random_descriptor(rng, 20, 60, 0.4);
  auto res = descriptor_distance(d, shifted_by(d, 7));
  CHECK(res.distance < 1e-12);
  CHECK(res.shift == 7);
}

TEST_CASE("shift recovery holds for every shift") {
  Rng rng(34);
  auto d = random_descriptor(rng, 8, 24, 0.3);
  for (int s = 0; s < 24; ++s) {
    auto res = descriptor_distance(d, shifted_by(d, s));
    CHECK(res.shift == s);
  }
}

TEST_CASE("distance agrees with the brute-force reference") {
  Rng rng(35);
  for (int trial = 0; trial < 12; ++trial) {
    auto q = random_descriptor(rng, 10, 30, 0.45);
    auto c = random_descriptor(rng, 10, 30, 0.45);
    auto fast = descriptor_distance(q, c);
    auto ref = brute_force_distance(q, c);
    CHECK(fast.distance == doctest::Approx(ref.distance).epsilon(1e-12));
    CHECK(fast.shift == ref.shift);
    CHECK(fast.distance >= 0.0);
    CHECK(fast.distance <= 2.0);
  }
}

TEST_CASE("an all-empty candidate matches the brute-force reference") {
  Rng rng(36);
  auto q = random_descriptor(rng, 10, 30, 0.4);
  ScanContextDescriptor empty;
  empty.cells = Eigen::MatrixXd::Constant(10, 30, -1.0);
  auto fast = descriptor_distance(q, empty);
  auto ref = brute_force_distance(q, empty);
  CHECK(fast.distance == doctest::Approx(ref.distance).epsilon(1e-12));
  auto both_empty = descriptor_distance(empty, empty);
  CHECK(both_empty.distance == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("zero-norm columns contribute unit distance") {
  ScanContextDescriptor q, c;
  q.cells = Eigen::MatrixXd::Zero(4, 6);
  c.cells = Eigen::MatrixXd::Zero(4, 6);
  auto res = descriptor_distance(q, c);
  CHECK(res.distance == doctest::Approx(1.0));
  CHECK(res.shift == 0);
}

TEST_CASE("mismatched descriptor dimensions are rejected") {
  Rng rng(37);
  auto a = random_descriptor(rng, 10, 30, 0.4);
  auto b = random_descriptor(rng, 10, 24, 0.4);
  CHECK_THROWS_AS(descriptor_distance(a, b), DataError);
}

TEST_CASE("odometry similarity follows the drift-normalized formula") {
  RetrievalConfig cfg;
  auto q = frame_at(100, 5.0, 0.0, 1000.0);
  auto c = frame_at(0, 0.0, 0.0, 0.0);
  CHECK(odometry_similarity(q, q, cfg) == 0.0);
  CHECK(odometry_similarity(q, c, cfg) == doctest::Approx(0.1));
  auto far = frame_at(1, 900.0, 0.0, 10.0);
  CHECK(odometry_similarity(q, far, cfg) == doctest::Approx(cfg.d_odom_cap));
}

TEST_CASE("retrieval ranks an exact revisit first among distractors") {
  Rng rng(38);
  RetrievalConfig cfg;
  cfg.top_k = 3;
  std::vector<ScanContextDescriptor> db;
  std::vector<Keyframe> frames;
  auto revisit_desc = random_descriptor(rng, 20, 60, 0.5);
  for (int i = 0; i < 30; ++i) {
    db.push_back(i == 3 ? revisit_desc : random_descriptor(rng, 20, 60, 0.5));
    frames.push_back(frame_at(i, 1.5 * i, 0.0, 1.5 * i));
  }
  Keyframe query = frame_at(60, 1.5 * 3, 0.2, 90.0);
  auto matches = retrieve_candidates(revisit_desc, query, db, frames, cfg);
  REQUIRE(!matches.empty());
  CHECK(matches[0].candidate_id == 3);
  CHECK(matches[0].d_sc < 1e-12);
}

TEST_CASE("identical descriptors reduce the ranking to odometry similarity") {
  Rng rng(39);
  RetrievalConfig cfg;
  cfg.top_k = 2;
  auto desc = random_descriptor(rng, 20, 60, 0.5);
  std::vector<ScanContextDescriptor> db(10, desc);
  std::vector<Keyframe> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(frame_at(i, 2.0 * i, 0.0, 2.0 * i));
  Keyframe query = frame_at(50, 4.0, 0.0, 100.0);
  auto matches = retrieve_candidates(desc, query, db, frames, cfg);
  REQUIRE(matches.size() == 2);
  CHECK(matches[0].candidate_id == 2);
  CHECK(matches[0].d_odom <= matches[1].d_odom);
}

TEST_CASE("asking for three candidates from a database of two returns two") {
  Rng rng(40);
  RetrievalConfig cfg;
  cfg.top_k = 3;
  std::vector<ScanContextDescriptor> db{random_descriptor(rng, 20, 60, 0.5),
                                        random_descriptor(rng, 20, 60, 0.5)};
  std::vector<Keyframe> frames{frame_at(0, 0, 0, 0), frame_at(1, 2, 0, 2)};
  Keyframe query = frame_at(40, 10.0, 0.0, 60.0);
  auto matches = retrieve_candidates(db[0], query, db, frames, cfg);
  CHECK(matches.size() == 2);
}

TEST_CASE("recent keyframes are excluded and the empty database returns nothing") {
  Rng rng(41);
  RetrievalConfig cfg;
  auto desc = random_descriptor(rng, 20, 60, 0.5);
  std::vector<ScanContextDescriptor> db(25, desc);
  std::vector<Keyframe> frames;
  for (int i = 0; i < 25; ++i) frames.push_back(frame_at(i, 1.0 * i, 0.0, 1.0 * i));
  Keyframe query = frame_at(24, 24.0, 0.0, 24.0);
  auto matches = retrieve_candidates(desc, query, db, frames, cfg);
  for (const auto& m : matches) CHECK(query.id - m.candidate_id > cfg.recency_exclusion);
  CHECK(!matches.empty());

  auto none = retrieve_candidates(desc, frame_at(5, 0, 0, 5), db, frames, cfg);
  CHECK(none.empty());
}

TEST_CASE("the first candidate attains the minimum cost over the database") {
  Rng rng(42);
  RetrievalConfig cfg;
  cfg.top_k = 1;
  std::vector<ScanContextDescriptor> db;
  std::vector<Keyframe> frames;
  for (int i = 0; i < 40; ++i) {
    db.push_back(random_descriptor(rng, 12, 36, 0.5));
    frames.push_back(frame_at(i, 1.5 * i, 0.3 * (i % 3), 1.5 * i));
  }
  auto qd = random_descriptor(rng, 12, 36, 0.5);
  Keyframe query = frame_at(80, 30.0, 0.0, 120.0);
  auto matches = retrieve_candidates(qd, query, db, frames, cfg);
  REQUIRE(matches.size() == 1);
  for (int i = 0; i < 40; ++i) {
    if (query.id - frames[i].id <= cfg.recency_exclusion) continue;
    const double cost = descriptor_distance(qd, db[i]).distance +
                        odometry_similarity(query, frames[i], cfg);
    CHECK(matches[0].cost() <= cost + 1e-12);
  }
}

TEST_CASE("accumulating five keyframes densifies the descriptor") {
  WorldModel world = generate_world(3, "tunnel");
  PathSpec path;
  path.waypoints = {Vec3(-30.0, -26.0, 1.0), Vec3(5.0, -26.0, 1.0)};
  SensorModel sensor;
  auto seq = generate_sequence(world, path, sensor, 4.0, 77);

  OdometryConfig ocfg;
  ocfg.ransac.seed = 9;
  auto odom = integrate_odometry(seq.scans, ocfg);
  KeyframeConfig kcfg;
  auto frames = select_keyframes(odom.trajectory, seq.scans, odom.inlier_clouds, kcfg);
  REQUIRE(frames.size() >= 8);

  RetrievalConfig one, five;
  one.accumulation = 1;
  five.accumulation = 5;
  double occ1 = 0.0, occ5 = 0.0;
  const int last = static_cast<int>(frames.size()) - 1;
  for (int idx = 5; idx <= last; ++idx) {
    auto d1 = build_keyframe_descriptor(frames, idx, one);
    auto d5 = build_keyframe_descriptor(frames, idx, five);
    occ1 += (d1.cells.array() != -1.0).count();
    occ5 += (d5.cells.array() != -1.0).count();
    CHECK(d5.source_ids.size() == 5);
    CHECK(d1.source_ids.size() == 1);
  }
  CHECK(occ5 > occ1);
}

TEST_CASE("the descriptor cache round-trips exactly") {
  Rng rng(43);
  std::vector<ScanContextDescriptor> descs;
  for (int i = 0; i < 4; ++i) {
    auto d = random_descriptor(rng, 20, 60, 0.5);
    d.source_ids = {i, i + 1};
    descs.push_back(d);
  }
  const auto base = (std::filesystem::temp_directory_path() / "desc_cache_test").string();
  save_descriptor_cache(descs, base);
  auto loaded = load_descriptor_cache(base);
  REQUIRE(loaded.size() == descs.size());
  for (std::size_t i = 0; i < descs.size(); ++i) {
    CHECK((loaded[i].cells - descs[i].cells).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded[i].source_ids == descs[i].source_ids);
    CHECK(loaded[i].max_range == descs[i].max_range);
  }
  std::filesystem::remove(base + ".bin");
  std::filesystem::remove(base + ".json");
}
