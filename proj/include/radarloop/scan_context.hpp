#pragma once

#include <string>
#include <vector>

#include "radarloop/keyframing.hpp"

namespace radarloop {

struct DescriptorConfig {
  int n_ring = 20;
  int n_sec = 60;
  double max_range = 40.0;  // m
  double weight = 1000.0;   // occupancy-information balancing divisor
};

struct ScanContextDescriptor {
  Eigen::MatrixXd cells;  // n_ring x n_sec; -1 marks an empty cell
  double max_range = 40.0;
  std::vector<int> source_ids;  // keyframes merged into this descriptor

  int n_ring() const { return static_cast<int>(cells.rows()); }
  int n_sec() const { return static_cast<int>(cells.cols()); }
};

// Polar binning of a cloud expressed in a gravity-aligned frame. Cell value
// is the intensity sum divided by cfg.weight; untouched cells stay -1;
// points whose ground range exceeds max_range are discarded.
ScanContextDescriptor build_descriptor(const PointCloud& cloud, const DescriptorConfig& cfg);

struct DescriptorDistance {
  double distance = 0.0;  // in [0, 2]
  int shift = 0;          // sectors; query heading relative to the candidate
};

// Minimum over circular shifts of the mean column-wise cosine distance.
// Shift s matches query column j against candidate column (j+s) mod n_sec,
// so s * sector_width is the query yaw relative to the candidate. Empty
// cells participate with value -1; a zero-norm column pair contributes 1.
// Ties resolve to the smallest shift.
DescriptorDistance descriptor_distance(const ScanContextDescriptor& query,
                                       const ScanContextDescriptor& candidate);

struct RetrievalConfig {
  int accumulation = 1;        // keyframes merged per descriptor
  int top_k = 1;               // candidates returned
  int recency_exclusion = 20;  // most recent keyframes never retrieved
  double drift_rate = 0.05;    // dimensionless odometry drift assumption
  double d_odom_cap = 5.0;
  DescriptorConfig descriptor;
};

// || t_q - t_c || / (drift_rate * |path length between them|), capped.
double odometry_similarity(const Keyframe& query, const Keyframe& candidate,
                           const RetrievalConfig& cfg);

struct RetrievalMatch {
  int candidate_id = -1;
  double d_sc = 0.0;
  double d_odom = 0.0;
  int shift = 0;

  double cost() const { return d_sc + d_odom; }
};

// Exhaustive scan over the database, ranked by ascending d_sc + d_odom with
// ties broken by lower candidate id. Descriptors and frames are parallel
// arrays indexed by keyframe id; entries closer than the recency exclusion
// (and the query itself) are skipped.
std::vector<RetrievalMatch> retrieve_candidates(const ScanContextDescriptor& query_descriptor,
                                                const Keyframe& query_frame,
                                                const std::vector<ScanContextDescriptor>& database,
                                                const std::vector<Keyframe>& frames,
                                                const RetrievalConfig& cfg);

// Accumulates the trailing window of keyframes ending at `index` into the
// newest frame, levels it with the IMU attitude, and bins it.
ScanContextDescriptor build_keyframe_descriptor(const std::vector<Keyframe>& frames, int index,
                                                const RetrievalConfig& cfg);

// Cache: <base>.bin holds row-major cell matrices back to back, <base>.json
// the dimensions and source ids.
void save_descriptor_cache(const std::vector<ScanContextDescriptor>& descriptors,
                           const std::string& base_path);
std::vector<ScanContextDescriptor> load_descriptor_cache(const std::string& base_path);

}  // namespace radarloop
