#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radarloop/alignment.hpp"
#include "radarloop/evaluation.hpp"
#include "radarloop/loop_verification.hpp"
#include "radarloop/odometry.hpp"
#include "radarloop/pose_graph.hpp"
#include "radarloop/scan_context.hpp"
#include "radarloop/sim.hpp"

namespace radarloop {

struct PathConfig {
  double speed = 1.5;         // m/s on straights
  double turn_rate_deg = 45.0;
  double imu_drift_rate_deg = 0.15;
  int laps = 2;               // loop routes drive the circuit this often
  double rate_hz = 10.0;      // scan rate
  // "auto" picks the scenario default (forest: loop, tunnel: out_and_back).
  std::string route = "auto";
};

struct ExperimentGrid {
  std::vector<int> accumulation{1, 5};  // keyframes merged per descriptor
  std::vector<int> top_k{1, 3};
  std::vector<double> y_th{0.9};
};

struct TrainingConfig {
  SynthesisConfig synthesis;  // entropy and registration follow the top level
  FeatureSet feature_set = FeatureSet::all;
  double align_lambda = 1e-4;
  double loop_lambda = 1e-4;
};

struct PipelineConfig {
  std::string scenario = "tunnel";
  std::uint64_t seed = 1;
  SensorModel sensor;
  PathConfig path;
  OdometryConfig odometry;
  KeyframeConfig keyframing;
  EntropyConfig entropy;
  RegistrationConfig registration;
  RetrievalConfig retrieval;
  TrainingConfig training;
  double y_th = 0.9;
  bool train_models = true;  // fit classifiers from the dataset during slam
  GraphConfig graph;
  OptimizeConfig optimizer;
  LoopLabelConfig labels;
  ExperimentGrid grid;
};

// Strict document: unknown keys anywhere raise ConfigError; the written file
// reloads to an identical document.
PipelineConfig load_config(const std::string& path);
void save_config(const PipelineConfig& cfg, const std::string& path);

// Scenario dataset: the forest drives its loop `laps` times in the same
// direction, the tunnel goes out and comes back. Writes scans, manifest,
// ground truth and the exact config used.
void cmd_synth(const PipelineConfig& cfg, const std::string& out_dir);

struct OdometryArtifacts {
  OdometryResult result;
  std::vector<Keyframe> keyframes;
};

OdometryArtifacts run_odometry_stage(const SequenceData& seq, const PipelineConfig& cfg);

void cmd_odometry(const PipelineConfig& cfg, const std::string& dataset_dir,
                  const std::string& out_dir);

AlignmentClassifier train_alignment_stage(const std::vector<Keyframe>& frames,
                                          const PipelineConfig& cfg);
void cmd_train_align(const PipelineConfig& cfg, const std::string& dataset_dir,
                     const std::string& model_path);

LoopClassifier train_loop_stage(const std::vector<Keyframe>& frames, const Trajectory& gt,
                                const AlignmentClassifier& alignment,
                                const PipelineConfig& cfg);
void cmd_train_loop(const PipelineConfig& cfg, const std::string& dataset_dir,
                    const std::string& align_model_path, const std::string& model_path);

struct LoopRecord {
  int query_id = -1;
  int candidate_id = -1;
  double timestamp = 0.0;  // query keyframe time, locates the marker in plots
  double d_sc = 0.0;
  double d_odom = 0.0;
  double d_align = 0.0;
  double y_loop = 0.0;
  bool accepted = false;  // selected and added to the graph
  bool gt_true = false;
  std::string outcome;  // success, safe-failure-low-confidence,
                        // safe-failure-false-low, dangerous-failure
};

struct SlamOutput {
  Trajectory odometry;  // full scan rate
  Trajectory slam;      // full scan rate, loop corrected
  std::vector<LoopRecord> records;
  int keyframe_count = 0;
  int accepted_loops = 0;
  double graph_chi2 = 0.0;
  int graph_iterations = 0;
  bool graph_converged = true;
};

// Odometry, keyframing, retrieval and verification per keyframe, then one
// batch graph solve over all accepted loops. Scans between keyframes ride
// rigidly on their keyframe's correction. Without accepted loops the slam
// trajectory is the odometry byte for byte.
SlamOutput run_slam(const SequenceData& seq, const AlignmentClassifier& alignment,
                    const LoopClassifier& loop_model, const PipelineConfig& cfg);

// One subdirectory per experiment grid cell (kA_topB, plus the threshold
// when several are listed). Empty model paths train from the dataset when
// train_models is set and raise ConfigError otherwise.
void cmd_slam(const PipelineConfig& cfg, const std::string& dataset_dir,
              const std::string& out_dir, const std::string& align_model_path = "",
              const std::string& loop_model_path = "");

// Trajectory metrics and detection curves for every cell found under
// results_dir, plus a consolidated eval.json. Re-running overwrites with
// identical bytes.
void cmd_eval(const std::string& results_dir, const std::string& dataset_dir);

}  // namespace radarloop
