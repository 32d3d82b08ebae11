#include "radarloop/loop_verification.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "radarloop/errors.hpp"

namespace radarloop {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

const Keyframe& frame_by_id(const std::vector<Keyframe>& frames, int id) {
  if (id >= 0 && id < static_cast<int>(frames.size()) && frames[id].id == id)
    return frames[id];
  for (const auto& kf : frames)
    if (kf.id == id) return kf;
  throw DataError("keyframe id not found: " + std::to_string(id));
}

}  // namespace

double LoopClassifier::score(double d_odom, double d_sc, double d_align) const {
  Eigen::Matrix<double, 4, 1> x;
  x << d_odom, d_sc, d_align, 1.0;
  return logistic(theta.dot(x));
}

LoopCandidate verify_candidate(const Keyframe& query, const Keyframe& candidate,
                               const RetrievalMatch& match,
                               const AlignmentClassifier& alignment,
                               const LoopClassifier& classifier, const VerificationConfig& cfg) {
  LoopCandidate out;
  out.query_id = query.id;
  out.candidate_id = candidate.id;
  out.d_sc = match.d_sc;
  out.d_odom = match.d_odom;
  out.shift = match.shift;

  Se3Pose init;
  init.rotation = yaw_quat(match.shift * (2.0 * M_PI / cfg.descriptor.n_sec));
  try {
    out.registration =
        register_p2d(query.surface_points, candidate.surface_points, init, cfg.registration);
    const QualityVector qv = assemble_quality_vector(
        positions_of(candidate.inlier_cloud), positions_of(query.inlier_cloud),
        candidate.surface_points, query.surface_points, out.registration.pose, cfg.entropy,
        cfg.registration);
    out.d_align = alignment.d_align(qv);
    out.y_loop = classifier.score(out.d_odom, out.d_sc, out.d_align);
  } catch (const NoOverlapError&) {
    out.registration.pose = init;
    out.no_overlap = true;
    out.y_loop = 0.0;
  } catch (const MeasuresUndefinedError&) {
    out.registration.pose = init;
    out.no_overlap = true;
    out.y_loop = 0.0;
  }
  return out;
}

std::vector<LoopCandidate> verify_candidates(const Keyframe& query,
                                             const std::vector<Keyframe>& frames,
                                             const std::vector<RetrievalMatch>& matches,
                                             const AlignmentClassifier& alignment,
                                             const LoopClassifier& classifier,
                                             const VerificationConfig& cfg) {
  std::vector<LoopCandidate> out;
  out.reserve(matches.size());
  for (const auto& m : matches)
    out.push_back(verify_candidate(query, frame_by_id(frames, m.candidate_id), m, alignment,
                                   classifier, cfg));
  return out;
}

std::optional<LoopCandidate> select_best(const std::vector<LoopCandidate>& verified,
                                         double y_th) {
  const LoopCandidate* best = nullptr;
  for (const auto& c : verified) {
    if (c.y_loop <= y_th) continue;
    if (!best || c.y_loop > best->y_loop ||
        (c.y_loop == best->y_loop && c.candidate_id < best->candidate_id))
      best = &c;
  }
  if (!best) return std::nullopt;
  return *best;
}

LoopClassifier fit_loop_classifier(const std::vector<Eigen::Vector3d>& features,
                                   const std::vector<int>& labels, double y_th, double lambda) {
  if (features.size() != labels.size())
    throw DataError("feature and label counts differ");
  const auto n = static_cast<Eigen::Index>(features.size());
  if (n == 0) throw TrainingFailedError("no loop training samples");

  Eigen::MatrixXd raw(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) raw.row(i) = features[static_cast<std::size_t>(i)];

  Eigen::Vector3d mu = raw.colwise().mean();
  Eigen::Vector3d sigma;
  for (int j = 0; j < 3; ++j) {
    const double sd = std::sqrt((raw.col(j).array() - mu[j]).square().mean());
    sigma[j] = sd < 1e-12 ? 1.0 : sd;
  }

  Eigen::MatrixXd X(n, 4);
  for (int j = 0; j < 3; ++j) X.col(j) = (raw.col(j).array() - mu[j]) / sigma[j];
  X.col(3).setOnes();

  const Eigen::VectorXd w = train_logistic(X, labels, lambda);

  LoopClassifier model;
  model.y_th = y_th;
  double bias = w[3];
  for (int j = 0; j < 3; ++j) {
    model.theta[j] = w[j] / sigma[j];
    bias -= w[j] * mu[j] / sigma[j];
  }
  model.theta[3] = bias;
  return model;
}

LoopClassifier train_loop_classifier(const std::vector<Keyframe>& frames,
                                     const std::vector<ScanContextDescriptor>& descriptors,
                                     const Trajectory& gt, const AlignmentClassifier& alignment,
                                     const LoopTrainingConfig& cfg) {
  if (frames.size() != descriptors.size())
    throw DataError("keyframes and descriptors are misaligned");

  LoopLabelConfig label_cfg;
  label_cfg.distance_threshold = cfg.gt_distance_threshold;
  label_cfg.recency_exclusion = cfg.retrieval.recency_exclusion;
  const auto labels = label_ground_truth_loops(gt, frames, label_cfg);
  std::unordered_map<std::int64_t, bool> truth;
  for (const auto& l : labels)
    truth[(static_cast<std::int64_t>(l.query_id) << 32) | l.candidate_id] = l.is_true;

  const LoopClassifier untrained;
  std::vector<Eigen::Vector3d> rows;
  std::vector<int> y;
  for (std::size_t qi = 0; qi < frames.size(); ++qi) {
    const auto matches =
        retrieve_candidates(descriptors[qi], frames[qi], descriptors, frames, cfg.retrieval);
    for (const auto& m : matches) {
      const LoopCandidate cand = verify_candidate(frames[qi], frame_by_id(frames, m.candidate_id),
                                                  m, alignment, untrained, cfg.verification);
      if (cand.no_overlap) continue;
      const auto it =
          truth.find((static_cast<std::int64_t>(cand.query_id) << 32) | cand.candidate_id);
      if (it == truth.end()) continue;
      rows.emplace_back(cand.d_odom, cand.d_sc, cand.d_align);
      y.push_back(it->second ? 1 : 0);
    }
  }
  return fit_loop_classifier(rows, y, cfg.y_th, cfg.lambda);
}

void save_loop_model(const LoopClassifier& model, const std::string& path) {
  nlohmann::json j;
  j["y_th"] = model.y_th;
  for (int i = 0; i < 4; ++i) j["theta"].push_back(model.theta[i]);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << j.dump(2) << "\n";
}

LoopClassifier load_loop_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file: " + std::string(e.what()));
  }
  LoopClassifier model;
  try {
    model.y_th = j.at("y_th").get<double>();
    for (int i = 0; i < 4; ++i) model.theta[i] = j.at("theta").at(i).get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file missing fields: " + std::string(e.what()));
  }
  if (!model.theta.allFinite() || model.y_th <= 0.0 || model.y_th >= 1.0)
    throw DataError("loop model out of range");
  return model;
}

}  // namespace radarloop
