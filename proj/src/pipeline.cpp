#include "radarloop/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "radarloop/errors.hpp"
#include "radarloop/rng.hpp"
#include "radarloop/svg.hpp"

namespace radarloop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kAlignTrainStream = 11;

void check_keys(const json& j, const char* where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json sensor_to_json(const SensorModel& s) {
  return json{{"azimuth_fov_deg", s.azimuth_fov_deg},
              {"elevation_fov_deg", s.elevation_fov_deg},
              {"max_range", s.max_range},
              {"min_range", s.min_range},
              {"range_sigma", s.range_sigma},
              {"angular_sigma_deg", s.angular_sigma_deg},
              {"doppler_sigma", s.doppler_sigma},
              {"intensity_sigma", s.intensity_sigma},
              {"ground_return_rate", s.ground_return_rate},
              {"dropout_prob", s.dropout_prob},
              {"points_per_scan", s.points_per_scan},
              {"outlier_fraction", s.outlier_fraction},
              {"outlier_doppler_range", s.outlier_doppler_range},
              {"cluster_fraction", s.cluster_fraction},
              {"cluster_size", s.cluster_size},
              {"cluster_jitter_deg", s.cluster_jitter_deg}};
}

void sensor_from_json(const json& j, SensorModel& s) {
  check_keys(j, "sensor",
             {"azimuth_fov_deg", "elevation_fov_deg", "max_range", "min_range", "range_sigma",
              "angular_sigma_deg", "doppler_sigma", "intensity_sigma", "ground_return_rate",
              "dropout_prob", "points_per_scan", "outlier_fraction", "outlier_doppler_range",
              "cluster_fraction", "cluster_size", "cluster_jitter_deg"});
  read_field(j, "azimuth_fov_deg", s.azimuth_fov_deg);
  read_field(j, "elevation_fov_deg", s.elevation_fov_deg);
  read_field(j, "max_range", s.max_range);
  read_field(j, "min_range", s.min_range);
  read_field(j, "range_sigma", s.range_sigma);
  read_field(j, "angular_sigma_deg", s.angular_sigma_deg);
  read_field(j, "doppler_sigma", s.doppler_sigma);
  read_field(j, "intensity_sigma", s.intensity_sigma);
  read_field(j, "ground_return_rate", s.ground_return_rate);
  read_field(j, "dropout_prob", s.dropout_prob);
  read_field(j, "points_per_scan", s.points_per_scan);
  read_field(j, "outlier_fraction", s.outlier_fraction);
  read_field(j, "outlier_doppler_range", s.outlier_doppler_range);
  read_field(j, "cluster_fraction", s.cluster_fraction);
  read_field(j, "cluster_size", s.cluster_size);
  read_field(j, "cluster_jitter_deg", s.cluster_jitter_deg);
}

json path_to_json(const PathConfig& p) {
  return json{{"speed", p.speed},
              {"turn_rate_deg", p.turn_rate_deg},
              {"imu_drift_rate_deg", p.imu_drift_rate_deg},
              {"laps", p.laps},
              {"rate_hz", p.rate_hz},
              {"route", p.route}};
}

void path_from_json(const json& j, PathConfig& p) {
  check_keys(j, "path", {"speed", "turn_rate_deg", "imu_drift_rate_deg", "laps", "rate_hz",
                         "route"});
  read_field(j, "speed", p.speed);
  read_field(j, "turn_rate_deg", p.turn_rate_deg);
  read_field(j, "imu_drift_rate_deg", p.imu_drift_rate_deg);
  read_field(j, "laps", p.laps);
  read_field(j, "rate_hz", p.rate_hz);
  read_field(j, "route", p.route);
  if (p.route != "auto" && p.route != "loop" && p.route != "out_and_back")
    throw ConfigError("route must be 'auto', 'loop', or 'out_and_back'");
}

json odometry_to_json(const OdometryConfig& o) {
  return json{{"ransac",
               json{{"max_iterations", o.ransac.max_iterations},
                    {"inlier_threshold", o.ransac.inlier_threshold},
                    {"min_inlier_count", o.ransac.min_inlier_count},
                    {"seed", o.ransac.seed},
                    {"max_condition", o.ransac.max_condition}}}};
}

void odometry_from_json(const json& j, OdometryConfig& o) {
  check_keys(j, "odometry", {"ransac"});
  if (!j.contains("ransac")) return;
  const json& r = j.at("ransac");
  check_keys(r, "odometry.ransac",
             {"max_iterations", "inlier_threshold", "min_inlier_count", "seed", "max_condition"});
  read_field(r, "max_iterations", o.ransac.max_iterations);
  read_field(r, "inlier_threshold", o.ransac.inlier_threshold);
  read_field(r, "min_inlier_count", o.ransac.min_inlier_count);
  read_field(r, "seed", o.ransac.seed);
  read_field(r, "max_condition", o.ransac.max_condition);
}

json keyframing_to_json(const KeyframeConfig& k) {
  return json{{"translation_gate", k.translation_gate},
              {"rotation_gate_deg", k.rotation_gate_deg},
              {"surface_cell", k.surface_cell},
              {"surface_min_points", k.surface_min_points},
              {"planarity_max_ratio", k.planarity_max_ratio}};
}

void keyframing_from_json(const json& j, KeyframeConfig& k) {
  check_keys(j, "keyframing",
             {"translation_gate", "rotation_gate_deg", "surface_cell", "surface_min_points",
              "planarity_max_ratio"});
  read_field(j, "translation_gate", k.translation_gate);
  read_field(j, "rotation_gate_deg", k.rotation_gate_deg);
  read_field(j, "surface_cell", k.surface_cell);
  read_field(j, "surface_min_points", k.surface_min_points);
  read_field(j, "planarity_max_ratio", k.planarity_max_ratio);
}

json entropy_to_json(const EntropyConfig& e) {
  return json{{"radius", e.radius},
              {"min_neighbors", e.min_neighbors},
              {"det_floor", e.det_floor}};
}

void entropy_from_json(const json& j, EntropyConfig& e) {
  check_keys(j, "entropy", {"radius", "min_neighbors", "det_floor"});
  read_field(j, "radius", e.radius);
  read_field(j, "min_neighbors", e.min_neighbors);
  read_field(j, "det_floor", e.det_floor);
}

json registration_to_json(const RegistrationConfig& r) {
  return json{{"correspondence_radius", r.correspondence_radius},
              {"huber_delta", r.huber_delta},
              {"max_iterations", r.max_iterations},
              {"step_tolerance", r.step_tolerance},
              {"max_step_halvings", r.max_step_halvings}};
}

void registration_from_json(const json& j, RegistrationConfig& r) {
  check_keys(j, "registration",
             {"correspondence_radius", "huber_delta", "max_iterations", "step_tolerance",
              "max_step_halvings"});
  read_field(j, "correspondence_radius", r.correspondence_radius);
  read_field(j, "huber_delta", r.huber_delta);
  read_field(j, "max_iterations", r.max_iterations);
  read_field(j, "step_tolerance", r.step_tolerance);
  read_field(j, "max_step_halvings", r.max_step_halvings);
}

json retrieval_to_json(const RetrievalConfig& r) {
  return json{{"accumulation", r.accumulation},
              {"top_k", r.top_k},
              {"recency_exclusion", r.recency_exclusion},
              {"drift_rate", r.drift_rate},
              {"d_odom_cap", r.d_odom_cap},
              {"descriptor",
               json{{"n_ring", r.descriptor.n_ring},
                    {"n_sec", r.descriptor.n_sec},
                    {"max_range", r.descriptor.max_range},
                    {"weight", r.descriptor.weight}}}};
}

void retrieval_from_json(const json& j, RetrievalConfig& r) {
  check_keys(j, "retrieval",
             {"accumulation", "top_k", "recency_exclusion", "drift_rate", "d_odom_cap",
              "descriptor"});
  read_field(j, "accumulation", r.accumulation);
  read_field(j, "top_k", r.top_k);
  read_field(j, "recency_exclusion", r.recency_exclusion);
  read_field(j, "drift_rate", r.drift_rate);
  read_field(j, "d_odom_cap", r.d_odom_cap);
  if (j.contains("descriptor")) {
    const json& d = j.at("descriptor");
    check_keys(d, "retrieval.descriptor", {"n_ring", "n_sec", "max_range", "weight"});
    read_field(d, "n_ring", r.descriptor.n_ring);
    read_field(d, "n_sec", r.descriptor.n_sec);
    read_field(d, "max_range", r.descriptor.max_range);
    read_field(d, "weight", r.descriptor.weight);
  }
}

std::string disturbance_name(DisturbanceClass c) {
  switch (c) {
    case DisturbanceClass::none: return "none";
    case DisturbanceClass::small: return "small";
    case DisturbanceClass::medium: return "medium";
    case DisturbanceClass::large: return "large";
  }
  throw ConfigError("unknown disturbance class");
}

DisturbanceClass disturbance_from_name(const std::string& name) {
  if (name == "none") return DisturbanceClass::none;
  if (name == "small") return DisturbanceClass::small;
  if (name == "medium") return DisturbanceClass::medium;
  if (name == "large") return DisturbanceClass::large;
  throw ConfigError("unknown disturbance class '" + name + "'");
}

json training_to_json(const TrainingConfig& t) {
  json disturbances = json::array();
  for (const auto& d : t.synthesis.disturbances)
    disturbances.push_back(json{{"class", disturbance_name(d.cls)},
                                {"translation", d.translation},
                                {"yaw_deg", d.yaw_deg}});
  return json{{"synthesis",
               json{{"disturbances", disturbances},
                    {"ground_plane_only", t.synthesis.ground_plane_only}}},
              {"feature_set", feature_set_name(t.feature_set)},
              {"align_lambda", t.align_lambda},
              {"loop_lambda", t.loop_lambda}};
}

void training_from_json(const json& j, TrainingConfig& t) {
  check_keys(j, "training", {"synthesis", "feature_set", "align_lambda", "loop_lambda"});
  if (j.contains("synthesis")) {
    const json& s = j.at("synthesis");
    check_keys(s, "training.synthesis", {"disturbances", "ground_plane_only"});
    if (s.contains("disturbances")) {
      t.synthesis.disturbances.clear();
      for (const auto& d : s.at("disturbances")) {
        check_keys(d, "training.synthesis.disturbances[]", {"class", "translation", "yaw_deg"});
        DisturbanceSpec spec;
        spec.cls = disturbance_from_name(d.at("class").get<std::string>());
        read_field(d, "translation", spec.translation);
        read_field(d, "yaw_deg", spec.yaw_deg);
        t.synthesis.disturbances.push_back(spec);
      }
    }
    read_field(s, "ground_plane_only", t.synthesis.ground_plane_only);
  }
  if (j.contains("feature_set"))
    t.feature_set = feature_set_from_name(j.at("feature_set").get<std::string>());
  read_field(j, "align_lambda", t.align_lambda);
  read_field(j, "loop_lambda", t.loop_lambda);
}

json graph_to_json(const GraphConfig& g) {
  return json{{"odom_sigma_t", g.odom_sigma_t},
              {"odom_sigma_r_deg", g.odom_sigma_r_deg},
              {"loop_sigma_t", g.loop_sigma_t},
              {"loop_sigma_r_deg", g.loop_sigma_r_deg},
              {"cauchy_scale", g.cauchy_scale},
              {"loop_information",
               g.loop_information == LoopInformationMode::kFixed ? "fixed" : "cost-scaled"},
              {"loop_cost_reference", g.loop_cost_reference}};
}

void graph_from_json(const json& j, GraphConfig& g) {
  check_keys(j, "graph",
             {"odom_sigma_t", "odom_sigma_r_deg", "loop_sigma_t", "loop_sigma_r_deg",
              "cauchy_scale", "loop_information", "loop_cost_reference"});
  read_field(j, "odom_sigma_t", g.odom_sigma_t);
  read_field(j, "odom_sigma_r_deg", g.odom_sigma_r_deg);
  read_field(j, "loop_sigma_t", g.loop_sigma_t);
  read_field(j, "loop_sigma_r_deg", g.loop_sigma_r_deg);
  read_field(j, "cauchy_scale", g.cauchy_scale);
  if (j.contains("loop_information")) {
    const std::string mode = j.at("loop_information").get<std::string>();
    if (mode == "fixed")
      g.loop_information = LoopInformationMode::kFixed;
    else if (mode == "cost-scaled")
      g.loop_information = LoopInformationMode::kCostScaled;
    else
      throw ConfigError("loop_information must be 'fixed' or 'cost-scaled'");
  }
  read_field(j, "loop_cost_reference", g.loop_cost_reference);
}

json optimizer_to_json(const OptimizeConfig& o) {
  return json{{"max_iterations", o.max_iterations}, {"rel_tolerance", o.rel_tolerance}};
}

void optimizer_from_json(const json& j, OptimizeConfig& o) {
  check_keys(j, "optimizer", {"max_iterations", "rel_tolerance"});
  read_field(j, "max_iterations", o.max_iterations);
  read_field(j, "rel_tolerance", o.rel_tolerance);
}

json labels_to_json(const LoopLabelConfig& l) {
  return json{{"distance_threshold", l.distance_threshold},
              {"heading_split_deg", l.heading_split_deg},
              {"recency_exclusion", l.recency_exclusion}};
}

void labels_from_json(const json& j, LoopLabelConfig& l) {
  check_keys(j, "labels", {"distance_threshold", "heading_split_deg", "recency_exclusion"});
  read_field(j, "distance_threshold", l.distance_threshold);
  read_field(j, "heading_split_deg", l.heading_split_deg);
  read_field(j, "recency_exclusion", l.recency_exclusion);
}

json grid_to_json(const ExperimentGrid& g) {
  return json{{"accumulation", g.accumulation}, {"top_k", g.top_k}, {"y_th", g.y_th}};
}

void grid_from_json(const json& j, ExperimentGrid& g) {
  check_keys(j, "grid", {"accumulation", "top_k", "y_th"});
  read_field(j, "accumulation", g.accumulation);
  read_field(j, "top_k", g.top_k);
  read_field(j, "y_th", g.y_th);
}

json config_to_json(const PipelineConfig& cfg) {
  return json{{"scenario", cfg.scenario},
              {"seed", cfg.seed},
              {"sensor", sensor_to_json(cfg.sensor)},
              {"path", path_to_json(cfg.path)},
              {"odometry", odometry_to_json(cfg.odometry)},
              {"keyframing", keyframing_to_json(cfg.keyframing)},
              {"entropy", entropy_to_json(cfg.entropy)},
              {"registration", registration_to_json(cfg.registration)},
              {"retrieval", retrieval_to_json(cfg.retrieval)},
              {"training", training_to_json(cfg.training)},
              {"y_th", cfg.y_th},
              {"train_models", cfg.train_models},
              {"graph", graph_to_json(cfg.graph)},
              {"optimizer", optimizer_to_json(cfg.optimizer)},
              {"labels", labels_to_json(cfg.labels)},
              {"grid", grid_to_json(cfg.grid)}};
}

PipelineConfig config_from_json(const json& j) {
  check_keys(j, "config",
             {"scenario", "seed", "sensor", "path", "odometry", "keyframing", "entropy",
              "registration", "retrieval", "training", "y_th", "train_models", "graph",
              "optimizer", "labels", "grid"});
  PipelineConfig cfg;
  read_field(j, "scenario", cfg.scenario);
  read_field(j, "seed", cfg.seed);
  if (j.contains("sensor")) sensor_from_json(j.at("sensor"), cfg.sensor);
  if (j.contains("path")) path_from_json(j.at("path"), cfg.path);
  if (j.contains("odometry")) odometry_from_json(j.at("odometry"), cfg.odometry);
  if (j.contains("keyframing")) keyframing_from_json(j.at("keyframing"), cfg.keyframing);
  if (j.contains("entropy")) entropy_from_json(j.at("entropy"), cfg.entropy);
  if (j.contains("registration")) registration_from_json(j.at("registration"), cfg.registration);
  if (j.contains("retrieval")) retrieval_from_json(j.at("retrieval"), cfg.retrieval);
  if (j.contains("training")) training_from_json(j.at("training"), cfg.training);
  read_field(j, "y_th", cfg.y_th);
  read_field(j, "train_models", cfg.train_models);
  if (j.contains("graph")) graph_from_json(j.at("graph"), cfg.graph);
  if (j.contains("optimizer")) optimizer_from_json(j.at("optimizer"), cfg.optimizer);
  if (j.contains("labels")) labels_from_json(j.at("labels"), cfg.labels);
  if (j.contains("grid")) grid_from_json(j.at("grid"), cfg.grid);
  return cfg;
}

// The synthesis block shares the entropy and registration settings with the
// top level; keep a single source of truth.
PipelineConfig normalized(PipelineConfig cfg) {
  cfg.training.synthesis.entropy = cfg.entropy;
  cfg.training.synthesis.registration = cfg.registration;
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << text;
}

VerificationConfig verification_config(const PipelineConfig& cfg) {
  VerificationConfig v;
  v.entropy = cfg.entropy;
  v.registration = cfg.registration;
  v.descriptor = cfg.retrieval.descriptor;
  return v;
}

std::string cell_name(int accumulation, int top_k, double y_th, bool with_threshold) {
  std::string name = "k" + std::to_string(accumulation) + "_top" + std::to_string(top_k);
  if (with_threshold) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", y_th);
    std::string th = buf;
    std::replace(th.begin(), th.end(), '.', 'p');
    name += "_yth" + th;
  }
  return name;
}

json outcome_counts(const std::vector<LoopRecord>& records) {
  json counts{{"success", 0},
              {"safe-failure-low-confidence", 0},
              {"safe-failure-false-low", 0},
              {"dangerous-failure", 0}};
  for (const auto& r : records) counts[r.outcome] = counts[r.outcome].get<int>() + 1;
  return counts;
}

void write_records(const std::vector<LoopRecord>& records, const std::string& path) {
  std::string out;
  for (const auto& r : records) {
    json row{{"query_id", r.query_id},       {"candidate_id", r.candidate_id},
             {"timestamp", r.timestamp},     {"d_sc", r.d_sc},
             {"d_odom", r.d_odom},           {"d_align", r.d_align},
             {"y_loop", r.y_loop},           {"accepted", r.accepted},
             {"gt_true", r.gt_true},         {"outcome", r.outcome}};
    out += row.dump() + "\n";
  }
  write_text(path, out);
}

std::vector<LoopRecord> read_records(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open records file: " + path);
  std::vector<LoopRecord> records;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed record line: " + std::string(e.what()));
    }
    LoopRecord r;
    r.query_id = row.value("query_id", -1);
    r.candidate_id = row.value("candidate_id", -1);
    r.timestamp = row.value("timestamp", 0.0);
    r.d_sc = row.value("d_sc", 0.0);
    r.d_odom = row.value("d_odom", 0.0);
    r.d_align = row.value("d_align", 0.0);
    r.y_loop = row.value("y_loop", 0.0);
    r.accepted = row.value("accepted", false);
    r.gt_true = row.value("gt_true", false);
    r.outcome = row.value("outcome", "");
    records.push_back(r);
  }
  return records;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "threshold,tp,fp,tn,fn,tpr,fpr,precision,recall\n";
  char buf[256];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.9g,%ld,%ld,%ld,%ld,%.9g,%.9g,%.9g,%.9g\n", p.threshold,
                  p.tp, p.fp, p.tn, p.fn, p.tpr(), p.fpr(), p.precision(), p.recall());
    out += buf;
  }
  return out;
}

std::vector<Eigen::Vector2d> xy_of(const Trajectory& traj) {
  std::vector<Eigen::Vector2d> xy;
  xy.reserve(traj.size());
  for (const auto& tp : traj.poses)
    xy.emplace_back(tp.pose.translation.x(), tp.pose.translation.y());
  return xy;
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config file: " + std::string(e.what()));
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError("invalid config value: " + std::string(e.what()));
  }
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
  write_text(path, config_to_json(cfg).dump(2) + "\n");
}

void cmd_synth(const PipelineConfig& cfg, const std::string& out_dir) {
  const WorldModel world = generate_world(cfg.seed, cfg.scenario);
  PathSpec path;
  path.speed = cfg.path.speed;
  path.turn_rate_deg = cfg.path.turn_rate_deg;
  path.imu_drift_rate_deg = cfg.path.imu_drift_rate_deg;
  std::string route = cfg.path.route;
  if (route == "auto") route = (cfg.scenario == "forest") ? "loop" : "out_and_back";
  if (route == "loop") {
    path.waypoints = world.loop_waypoints;
    path.closed = true;
    path.laps = cfg.path.laps;
  } else {
    path.waypoints = world.canonical_waypoints;
    path.out_and_back = true;
    path.laps = 1;
  }
  const SequenceData seq = generate_sequence(world, path, cfg.sensor, cfg.path.rate_hz, cfg.seed);
  fs::create_directories(out_dir);
  save_dataset(seq, out_dir);
  save_config(cfg, (fs::path(out_dir) / "config.json").string());
}

OdometryArtifacts run_odometry_stage(const SequenceData& seq, const PipelineConfig& cfg) {
  OdometryArtifacts out;
  out.result = integrate_odometry(seq.scans, cfg.odometry);
  out.keyframes = select_keyframes(out.result.trajectory, seq.scans, out.result.inlier_clouds,
                                   cfg.keyframing);
  return out;
}

void cmd_odometry(const PipelineConfig& cfg, const std::string& dataset_dir,
                  const std::string& out_dir) {
  const SequenceData seq = load_dataset(dataset_dir);
  const auto stage = run_odometry_stage(seq, cfg);
  fs::create_directories(out_dir);
  save_tum(stage.result.trajectory, (fs::path(out_dir) / "odometry.tum").string());
  int failures = 0;
  for (bool ok : stage.result.estimation_ok)
    if (!ok) ++failures;
  json report{{"scans", seq.scans.size()},
              {"keyframes", stage.keyframes.size()},
              {"estimation_failures", failures}};
  write_text((fs::path(out_dir) / "odometry_report.json").string(), report.dump(2) + "\n");
}

AlignmentClassifier train_alignment_stage(const std::vector<Keyframe>& frames,
                                          const PipelineConfig& cfg0) {
  const PipelineConfig cfg = normalized(cfg0);
  Rng rng = Rng::child(cfg.seed, kAlignTrainStream);
  const auto samples = synthesize_training_set(frames, cfg.training.synthesis, rng);
  return train_alignment_classifier(samples, cfg.training.feature_set,
                                    cfg.training.align_lambda);
}

void cmd_train_align(const PipelineConfig& cfg, const std::string& dataset_dir,
                     const std::string& model_path) {
  const SequenceData seq = load_dataset(dataset_dir);
  const auto stage = run_odometry_stage(seq, cfg);
  const auto model = train_alignment_stage(stage.keyframes, cfg);
  save_alignment_model(model, model_path);
}

LoopClassifier train_loop_stage(const std::vector<Keyframe>& frames, const Trajectory& gt,
                                const AlignmentClassifier& alignment,
                                const PipelineConfig& cfg0) {
  const PipelineConfig cfg = normalized(cfg0);
  std::vector<ScanContextDescriptor> descriptors;
  descriptors.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i)
    descriptors.push_back(build_keyframe_descriptor(frames, static_cast<int>(i), cfg.retrieval));
  LoopTrainingConfig tc;
  tc.retrieval = cfg.retrieval;
  tc.verification = verification_config(cfg);
  tc.gt_distance_threshold = cfg.labels.distance_threshold;
  tc.y_th = cfg.y_th;
  tc.lambda = cfg.training.loop_lambda;
  return train_loop_classifier(frames, descriptors, gt, alignment, tc);
}

void cmd_train_loop(const PipelineConfig& cfg, const std::string& dataset_dir,
                    const std::string& align_model_path, const std::string& model_path) {
  const SequenceData seq = load_dataset(dataset_dir);
  if (seq.ground_truth.empty()) throw DataError("loop training needs a ground-truth trajectory");
  const auto alignment = load_alignment_model(align_model_path);
  const auto stage = run_odometry_stage(seq, cfg);
  const auto model = train_loop_stage(stage.keyframes, seq.ground_truth, alignment, cfg);
  save_loop_model(model, model_path);
}

SlamOutput run_slam(const SequenceData& seq, const AlignmentClassifier& alignment,
                    const LoopClassifier& loop_model, const PipelineConfig& cfg0) {
  const PipelineConfig cfg = normalized(cfg0);
  SlamOutput out;
  const auto stage = run_odometry_stage(seq, cfg);
  const auto& frames = stage.keyframes;
  out.odometry = stage.result.trajectory;
  out.keyframe_count = static_cast<int>(frames.size());

  std::vector<ScanContextDescriptor> descriptors;
  descriptors.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i)
    descriptors.push_back(build_keyframe_descriptor(frames, static_cast<int>(i), cfg.retrieval));

  const VerificationConfig vcfg = verification_config(cfg);
  std::vector<LoopConstraint> accepted;
  for (std::size_t qi = 0; qi < frames.size(); ++qi) {
    const auto matches =
        retrieve_candidates(descriptors[qi], frames[qi], descriptors, frames, cfg.retrieval);
    if (matches.empty()) continue;
    const auto verified =
        verify_candidates(frames[qi], frames, matches, alignment, loop_model, vcfg);
    const auto best = select_best(verified, cfg.y_th);

    for (const auto& v : verified) {
      LoopRecord rec;
      rec.query_id = v.query_id;
      rec.candidate_id = v.candidate_id;
      rec.timestamp = frames[qi].timestamp;
      rec.d_sc = v.d_sc;
      rec.d_odom = v.d_odom;
      rec.d_align = v.d_align;
      rec.y_loop = v.y_loop;
      rec.accepted = best.has_value() && best->candidate_id == v.candidate_id;
      if (!seq.ground_truth.empty()) {
        const auto& gq = seq.ground_truth[frames[qi].scan_index].pose;
        const auto& gc = seq.ground_truth[frames[v.candidate_id].scan_index].pose;
        rec.gt_true = (gq.translation - gc.translation).norm() <= cfg.labels.distance_threshold;
      }
      if (v.y_loop > cfg.y_th)
        rec.outcome = rec.gt_true ? "success" : "dangerous-failure";
      else
        rec.outcome = rec.gt_true ? "safe-failure-low-confidence" : "safe-failure-false-low";
      out.records.push_back(rec);
    }
    if (best) {
      LoopConstraint c;
      c.candidate_id = best->candidate_id;
      c.query_id = best->query_id;
      c.query_to_candidate = best->registration.pose;
      c.final_cost = best->registration.final_cost;
      accepted.push_back(c);
    }
  }
  out.accepted_loops = static_cast<int>(accepted.size());

  if (accepted.empty()) {
    out.slam = out.odometry;
    return out;
  }

  const PoseGraph graph = build_graph(frames, accepted, cfg.graph);
  const OptimizationResult solved = optimize(graph, cfg.optimizer);
  out.graph_chi2 = solved.chi2;
  out.graph_iterations = solved.iterations;
  out.graph_converged = solved.converged;

  std::vector<Se3Pose> corrections(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i)
    corrections[i] = solved.poses[i] * frames[i].odom_pose.inverse();

  out.slam = out.odometry;
  std::size_t k = 0;
  for (std::size_t s = 0; s < out.slam.size(); ++s) {
    while (k + 1 < frames.size() && frames[k + 1].scan_index <= static_cast<int>(s)) ++k;
    out.slam[s].pose = corrections[k] * out.odometry[s].pose;
  }
  return out;
}

void cmd_slam(const PipelineConfig& cfg0, const std::string& dataset_dir,
              const std::string& out_dir, const std::string& align_model_path,
              const std::string& loop_model_path) {
  const PipelineConfig cfg = normalized(cfg0);
  if (cfg.grid.accumulation.empty() || cfg.grid.top_k.empty() || cfg.grid.y_th.empty())
    throw ConfigError("experiment grid must list at least one value per axis");

  const bool align_given = !align_model_path.empty();
  const bool loop_given = !loop_model_path.empty();
  if ((!align_given || !loop_given) && !cfg.train_models)
    throw ConfigError("classifier models missing and training is disabled");

  const SequenceData seq = load_dataset(dataset_dir);
  fs::create_directories(out_dir);
  save_config(cfg0, (fs::path(out_dir) / "config.json").string());

  AlignmentClassifier alignment;
  OdometryArtifacts stage;
  bool stage_ready = false;
  if (align_given) {
    alignment = load_alignment_model(align_model_path);
  } else {
    stage = run_odometry_stage(seq, cfg);
    stage_ready = true;
    alignment = train_alignment_stage(stage.keyframes, cfg);
    save_alignment_model(alignment, (fs::path(out_dir) / "align_model.json").string());
  }

  LoopClassifier shared_loop_model;
  if (loop_given) shared_loop_model = load_loop_model(loop_model_path);

  const bool name_threshold = cfg.grid.y_th.size() > 1;
  json cells = json::array();
  for (int acc : cfg.grid.accumulation)
    for (int top : cfg.grid.top_k)
      for (double y_th : cfg.grid.y_th) {
        PipelineConfig cell_cfg = cfg;
        cell_cfg.retrieval.accumulation = acc;
        cell_cfg.retrieval.top_k = top;
        cell_cfg.y_th = y_th;

        const std::string name = cell_name(acc, top, y_th, name_threshold);
        const fs::path cell_dir = fs::path(out_dir) / name;
        fs::create_directories(cell_dir);

        LoopClassifier loop_model = shared_loop_model;
        if (!loop_given) {
          if (!stage_ready) {
            stage = run_odometry_stage(seq, cfg);
            stage_ready = true;
          }
          if (seq.ground_truth.empty())
            throw DataError("loop training needs a ground-truth trajectory");
          loop_model =
              train_loop_stage(stage.keyframes, seq.ground_truth, alignment, cell_cfg);
          save_loop_model(loop_model, (cell_dir / "loop_model.json").string());
        }

        const SlamOutput slam = run_slam(seq, alignment, loop_model, cell_cfg);
        save_tum(slam.odometry, (cell_dir / "odometry.tum").string());
        save_tum(slam.slam, (cell_dir / "slam.tum").string());
        write_records(slam.records, (cell_dir / "records.jsonl").string());

        json report{{"cell", name},
                    {"accumulation", acc},
                    {"top_k", top},
                    {"y_th", y_th},
                    {"scans", seq.scans.size()},
                    {"keyframes", slam.keyframe_count},
                    {"candidates_verified", slam.records.size()},
                    {"accepted_loops", slam.accepted_loops},
                    {"outcomes", outcome_counts(slam.records)},
                    {"graph",
                     json{{"chi2", slam.graph_chi2},
                          {"iterations", slam.graph_iterations},
                          {"converged", slam.graph_converged}}}};
        write_text((cell_dir / "report.json").string(), report.dump(2) + "\n");
        cells.push_back(report);
      }

  json summary{{"dataset", fs::path(dataset_dir).filename().string()},
               {"scenario", cfg.scenario},
               {"seed", cfg.seed},
               {"cells", cells}};
  write_text((fs::path(out_dir) / "report.json").string(), summary.dump(2) + "\n");
}

void cmd_eval(const std::string& results_dir, const std::string& dataset_dir) {
  const Trajectory gt = load_tum((fs::path(dataset_dir) / "gt.tum").string());

  std::vector<std::string> cell_dirs;
  for (const auto& entry : fs::directory_iterator(results_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "slam.tum"))
      cell_dirs.push_back(entry.path().string());
  std::sort(cell_dirs.begin(), cell_dirs.end());
  if (cell_dirs.empty()) throw DataError("no result cells under " + results_dir);

  json table = json::array();
  for (const auto& dir : cell_dirs) {
    const Trajectory odom = load_tum((fs::path(dir) / "odometry.tum").string());
    const Trajectory slam = load_tum((fs::path(dir) / "slam.tum").string());

    const KittiMetrics kitti_odom = kitti_metrics(odom, gt);
    const KittiMetrics kitti_slam = kitti_metrics(slam, gt);
    const AteResult ate_odom = ate(odom, gt);
    const AteResult ate_slam = ate(slam, gt);

    json entry{{"cell", fs::path(dir).filename().string()},
               {"odometry",
                json{{"t_rel_percent", kitti_odom.t_rel_percent},
                     {"r_rel_deg_per_100m", kitti_odom.r_rel_deg_per_100m},
                     {"ate_rmse", ate_odom.aligned_rmse}}},
               {"slam",
                json{{"t_rel_percent", kitti_slam.t_rel_percent},
                     {"r_rel_deg_per_100m", kitti_slam.r_rel_deg_per_100m},
                     {"ate_rmse", ate_slam.aligned_rmse}}}};

    const std::string records_path = (fs::path(dir) / "records.jsonl").string();
    if (fs::exists(records_path)) {
      const auto records = read_records(records_path);
      std::vector<double> scores;
      std::vector<int> labels;
      for (const auto& r : records) {
        scores.push_back(r.y_loop);
        labels.push_back(r.gt_true ? 1 : 0);
      }
      try {
        const RocResult roc = roc_curve(scores, labels);
        const auto pr = pr_curve(scores, labels);
        write_text((fs::path(dir) / "roc.csv").string(), curve_csv(roc.points));
        write_text((fs::path(dir) / "pr.csv").string(), curve_csv(pr));
        entry["detection"] = json{{"auroc", roc.auroc},
                                  {"max_f1", max_f1(pr)},
                                  {"recall_at_full_precision", recall_at_full_precision(pr)},
                                  {"records", records.size()}};

        std::vector<Eigen::Vector2d> roc_xy, pr_xy;
        for (const auto& p : roc.points) roc_xy.emplace_back(p.fpr(), p.tpr());
        for (const auto& p : pr) pr_xy.emplace_back(p.recall(), p.precision());
        write_plot_svg((fs::path(dir) / "roc_curve.svg").string(), "Loop detection ROC",
                       "false positive rate", "true positive rate",
                       {{"ROC", "#1f77b4", roc_xy, true, 3.0}});
        write_plot_svg((fs::path(dir) / "pr_curve.svg").string(), "Loop detection PR", "recall",
                       "precision", {{"PR", "#2ca02c", pr_xy, true, 3.0}});
      } catch (const UndefinedMetricError&) {
        entry["detection"] = nullptr;
      }

      std::vector<PlotSeries> overlay;
      overlay.push_back({"ground truth", "#b0b0b0", xy_of(gt), true, 3.0});
      overlay.push_back({"odometry", "#9467bd", xy_of(odom), true, 3.0});
      overlay.push_back({"slam", "#111111", xy_of(slam), true, 3.0});
      const struct {
        const char* outcome;
        const char* label;
        const char* color;
      } classes[] = {{"success", "loop: success", "#2ca02c"},
                     {"safe-failure-low-confidence", "loop: safe miss", "#1f77b4"},
                     {"safe-failure-false-low", "loop: safe reject", "#ff7f0e"},
                     {"dangerous-failure", "loop: dangerous", "#d62728"}};
      for (const auto& cls : classes) {
        PlotSeries s{cls.label, cls.color, {}, false, 4.0};
        for (const auto& r : records) {
          if (r.outcome != cls.outcome) continue;
          for (const auto& tp : slam.poses)
            if (tp.timestamp == r.timestamp) {
              s.points.emplace_back(tp.pose.translation.x(), tp.pose.translation.y());
              break;
            }
        }
        if (!s.points.empty()) overlay.push_back(s);
      }
      write_plot_svg((fs::path(dir) / "trajectory.svg").string(), "Trajectory overlay", "x [m]",
                     "y [m]", overlay, true);
    }
    table.push_back(entry);
  }

  json report{{"cells", table}};
  write_text((fs::path(results_dir) / "eval.json").string(), report.dump(2) + "\n");
}

}  // namespace radarloop
