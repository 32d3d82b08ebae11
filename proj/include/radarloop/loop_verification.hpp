#pragma once

#include <optional>
#include <vector>

#include "radarloop/alignment.hpp"
#include "radarloop/evaluation.hpp"
#include "radarloop/scan_context.hpp"

namespace radarloop {

struct LoopCandidate {
  int query_id = -1;
  int candidate_id = -1;
  double d_sc = 0.0;
  double d_odom = 0.0;
  int shift = 0;
  RegistrationResult registration;
  double d_align = 0.0;  // pre-sigmoid alignment score
  double y_loop = 0.0;
  bool no_overlap = false;  // verification failed; y_loop forced to 0
};

struct LoopClassifier {
  // Weights on [d_odom, d_sc, d_align, 1].
  Eigen::Matrix<double, 4, 1> theta = Eigen::Matrix<double, 4, 1>::Zero();
  double y_th = 0.9;

  double score(double d_odom, double d_sc, double d_align) const;
};

struct VerificationConfig {
  EntropyConfig entropy;
  RegistrationConfig registration;
  DescriptorConfig descriptor;  // supplies the sector width for the yaw init
};

// Registers the query against the candidate starting from a pure yaw guess
// of shift * sector width, evaluates the quality vector at the refined pose,
// and scores the loop. No overlap (or undefined measures) keeps the
// candidate with y_loop pinned to 0.
LoopCandidate verify_candidate(const Keyframe& query, const Keyframe& candidate,
                               const RetrievalMatch& match,
                               const AlignmentClassifier& alignment,
                               const LoopClassifier& classifier, const VerificationConfig& cfg);

std::vector<LoopCandidate> verify_candidates(const Keyframe& query,
                                             const std::vector<Keyframe>& frames,
                                             const std::vector<RetrievalMatch>& matches,
                                             const AlignmentClassifier& alignment,
                                             const LoopClassifier& classifier,
                                             const VerificationConfig& cfg);

// Highest y_loop strictly above y_th; ties resolve to the lower candidate
// id; empty when nothing qualifies.
std::optional<LoopCandidate> select_best(const std::vector<LoopCandidate>& verified,
                                         double y_th);

// Logistic fit on raw loop features [d_odom, d_sc, d_align]; standardization
// is folded back so theta applies to the raw vector.
LoopClassifier fit_loop_classifier(const std::vector<Eigen::Vector3d>& features,
                                   const std::vector<int>& labels, double y_th = 0.9,
                                   double lambda = 1e-4);

struct LoopTrainingConfig {
  RetrievalConfig retrieval;
  VerificationConfig verification;
  double gt_distance_threshold = 6.0;  // m
  double y_th = 0.9;
  double lambda = 1e-4;
};

// Runs retrieval + verification over a ground-truthed sequence, labels every
// candidate with the distance rule, and fits the loop classifier.
LoopClassifier train_loop_classifier(const std::vector<Keyframe>& frames,
                                     const std::vector<ScanContextDescriptor>& descriptors,
                                     const Trajectory& gt, const AlignmentClassifier& alignment,
                                     const LoopTrainingConfig& cfg);

void save_loop_model(const LoopClassifier& model, const std::string& path);
LoopClassifier load_loop_model(const std::string& path);

}  // namespace radarloop
