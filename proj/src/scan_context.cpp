#include "radarloop/scan_context.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "radarloop/errors.hpp"

namespace radarloop {

ScanContextDescriptor build_descriptor(const PointCloud& cloud, const DescriptorConfig& cfg) {
  if (cfg.n_ring < 1 || cfg.n_sec < 1 || cfg.max_range <= 0.0 || cfg.weight <= 0.0)
    throw ConfigError("descriptor grid must be positive");
  ScanContextDescriptor desc;
  desc.max_range = cfg.max_range;
  desc.cells = Eigen::MatrixXd::Zero(cfg.n_ring, cfg.n_sec);
  Eigen::MatrixXi occupied = Eigen::MatrixXi::Zero(cfg.n_ring, cfg.n_sec);

  const double ring_width = cfg.max_range / cfg.n_ring;
  const double sector_width = 2.0 * M_PI / cfg.n_sec;
  for (const auto& pt : cloud) {
    const double range = std::hypot(pt.position.x(), pt.position.y());
    if (range > cfg.max_range) continue;
    int ring = std::min(static_cast<int>(range / ring_width), cfg.n_ring - 1);
    const double az = std::atan2(pt.position.y(), pt.position.x());
    int sec = std::min(static_cast<int>((az + M_PI) / sector_width), cfg.n_sec - 1);
    desc.cells(ring, sec) += pt.intensity / cfg.weight;
    occupied(ring, sec) = 1;
  }
  for (int i = 0; i < cfg.n_ring; ++i)
    for (int j = 0; j < cfg.n_sec; ++j)
      if (!occupied(i, j)) desc.cells(i, j) = -1.0;
  return desc;
}

DescriptorDistance descriptor_distance(const ScanContextDescriptor& query,
                                       const ScanContextDescriptor& candidate) {
  if (query.cells.rows() != candidate.cells.rows() ||
      query.cells.cols() != candidate.cells.cols())
    throw DataError("descriptor dimensions do not match");
  const int n_sec = query.n_sec();

  std::vector<double> q_norm(n_sec), c_norm(n_sec);
  for (int j = 0; j < n_sec; ++j) {
    q_norm[j] = query.cells.col(j).norm();
    c_norm[j] = candidate.cells.col(j).norm();
  }

  DescriptorDistance best;
  best.distance = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_sec; ++s) {
    double acc = 0.0;
    for (int j = 0; j < n_sec; ++j) {
      const int cj = (j + s) % n_sec;
      const double denom = q_norm[j] * c_norm[cj];
      if (denom <= 0.0) {
        acc += 1.0;
        continue;
      }
      acc += 1.0 - query.cells.col(j).dot(candidate.cells.col(cj)) / denom;
    }
    const double d = acc / n_sec;
    if (d < best.distance) {
      best.distance = d;
      best.shift = s;
    }
  }
  return best;
}

double odometry_similarity(const Keyframe& query, const Keyframe& candidate,
                           const RetrievalConfig& cfg) {
  const double dist = (query.odom_pose.translation - candidate.odom_pose.translation).norm();
  const double traveled = std::abs(query.path_length - candidate.path_length);
  if (traveled <= 0.0) return dist <= 0.0 ? 0.0 : cfg.d_odom_cap;
  return std::min(dist / (cfg.drift_rate * traveled), cfg.d_odom_cap);
}

std::vector<RetrievalMatch> retrieve_candidates(const ScanContextDescriptor& query_descriptor,
                                                const Keyframe& query_frame,
                                                const std::vector<ScanContextDescriptor>& database,
                                                const std::vector<Keyframe>& frames,
                                                const RetrievalConfig& cfg) {
  if (database.size() != frames.size())
    throw DataError("descriptor database and keyframes are misaligned");
  std::vector<RetrievalMatch> matches;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const int cid = frames[i].id;
    if (cid >= query_frame.id - cfg.recency_exclusion) continue;
    const DescriptorDistance d = descriptor_distance(query_descriptor, database[i]);
    RetrievalMatch m;
    m.candidate_id = cid;
    m.d_sc = d.distance;
    m.d_odom = odometry_similarity(query_frame, frames[i], cfg);
    m.shift = d.shift;
    matches.push_back(m);
  }
  std::sort(matches.begin(), matches.end(), [](const RetrievalMatch& a, const RetrievalMatch& b) {
    if (a.cost() != b.cost()) return a.cost() < b.cost();
    return a.candidate_id < b.candidate_id;
  });
  if (static_cast<int>(matches.size()) > cfg.top_k) matches.resize(cfg.top_k);
  return matches;
}

ScanContextDescriptor build_keyframe_descriptor(const std::vector<Keyframe>& frames, int index,
                                                const RetrievalConfig& cfg) {
  if (index < 0 || index >= static_cast<int>(frames.size()))
    throw DataError("keyframe index out of range");
  const int start = std::max(0, index - cfg.accumulation + 1);
  std::vector<Keyframe> window(frames.begin() + start, frames.begin() + index + 1);
  PointCloud merged = accumulate_keyframes(window, cfg.accumulation);

  const Quat level = leveling_rotation(frames[index].imu_orientation);
  for (auto& pt : merged) pt.position = level * pt.position;

  ScanContextDescriptor desc = build_descriptor(merged, cfg.descriptor);
  for (const auto& kf : window) desc.source_ids.push_back(kf.id);
  return desc;
}

void save_descriptor_cache(const std::vector<ScanContextDescriptor>& descriptors,
                           const std::string& base_path) {
  nlohmann::json index;
  index["count"] = descriptors.size();
  std::ofstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw DataError("cannot write descriptor cache: " + base_path + ".bin");
  for (const auto& d : descriptors) {
    nlohmann::json entry;
    entry["n_ring"] = d.n_ring();
    entry["n_sec"] = d.n_sec();
    entry["max_range"] = d.max_range;
    entry["source_ids"] = d.source_ids;
    index["entries"].push_back(entry);
    for (int i = 0; i < d.n_ring(); ++i)
      for (int j = 0; j < d.n_sec(); ++j) {
        const double v = d.cells(i, j);
        bin.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
  }
  std::ofstream js(base_path + ".json");
  if (!js) throw DataError("cannot write descriptor index: " + base_path + ".json");
  js << index.dump(2) << "\n";
}

std::vector<ScanContextDescriptor> load_descriptor_cache(const std::string& base_path) {
  std::ifstream js(base_path + ".json");
  if (!js) throw DataError("cannot read descriptor index: " + base_path + ".json");
  nlohmann::json index;
  try {
    js >> index;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed descriptor index: " + std::string(e.what()));
  }
  std::ifstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw DataError("cannot read descriptor cache: " + base_path + ".bin");

  std::vector<ScanContextDescriptor> out;
  try {
    const std::size_t count = index.at("count").get<std::size_t>();
    for (std::size_t k = 0; k < count; ++k) {
      const auto& entry = index.at("entries").at(k);
      ScanContextDescriptor d;
      const int nr = entry.at("n_ring").get<int>();
      const int ns = entry.at("n_sec").get<int>();
      d.max_range = entry.at("max_range").get<double>();
      d.source_ids = entry.at("source_ids").get<std::vector<int>>();
      d.cells.resize(nr, ns);
      for (int i = 0; i < nr; ++i)
        for (int j = 0; j < ns; ++j) {
          double v = 0.0;
          if (!bin.read(reinterpret_cast<char*>(&v), sizeof(double)))
            throw DataError("descriptor cache truncated: " + base_path + ".bin");
          d.cells(i, j) = v;
        }
      out.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("descriptor index missing fields: " + std::string(e.what()));
  }
  return out;
}

}  // namespace radarloop
