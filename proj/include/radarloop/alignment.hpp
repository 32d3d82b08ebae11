#pragma once

#include <string>
#include <vector>

#include "radarloop/keyframing.hpp"
#include "radarloop/registration.hpp"
#include "radarloop/rng.hpp"

namespace radarloop {

struct EntropyConfig {
  double radius = 1.5;     // m
  int min_neighbors = 5;   // own-cloud neighborhood size, self included
  double det_floor = 1e-12;
};

struct EntropyMeasures {
  double h_separate = 0.0;  // mean per-point entropy, own-cloud neighborhoods
  double h_joint = 0.0;     // mean per-point entropy, union neighborhoods
  double h_overlap = 0.0;   // fraction of points with a cross-cloud neighbor
};

// B is transformed into A's frame by pose. Per-point differential entropy is
// 0.5*ln((2*pi*e)^3 * det(cov)) over the neighborhood within radius; H_j and
// H_s average over the same eligible points (own-cloud neighborhood of at
// least min_neighbors, so both measures exist per point). Throws
// MeasuresUndefinedError when no point is eligible.
EntropyMeasures compute_entropy_measures(const std::vector<Vec3>& cloud_a,
                                         const std::vector<Vec3>& cloud_b, const Se3Pose& pose,
                                         const EntropyConfig& cfg);

struct QualityVector {
  double h_joint = 0.0;
  double h_separate = 0.0;
  double h_overlap = 0.0;
  double c_f = 0.0;
  double c_o = 0.0;
  double c_a = 0.0;

  // [H_j, H_s, H_o, C_f, C_o, C_a, 1]
  Eigen::Matrix<double, 7, 1> to_vector() const;
};

// pose maps query-frame coordinates into the candidate frame; entropy is
// computed between the raw clouds, the C measures on the surface points.
QualityVector assemble_quality_vector(const std::vector<Vec3>& candidate_cloud,
                                      const std::vector<Vec3>& query_cloud,
                                      const std::vector<SurfacePoint>& candidate_surface,
                                      const std::vector<SurfacePoint>& query_surface,
                                      const Se3Pose& query_to_candidate, const EntropyConfig& ecfg,
                                      const RegistrationConfig& rcfg);

enum class DisturbanceClass { none, small, medium, large };

struct DisturbanceSpec {
  DisturbanceClass cls = DisturbanceClass::small;
  double translation = 0.0;  // m, exact magnitude
  double yaw_deg = 0.0;      // exact magnitude, random sign
};

struct LabeledAlignmentSample {
  QualityVector qv;
  bool aligned = false;
  DisturbanceClass disturbance = DisturbanceClass::none;
  int pair_index = 0;  // index of the earlier keyframe of the pair
  Se3Pose pose;        // the pose the quality vector was evaluated at
};

struct SynthesisConfig {
  std::vector<DisturbanceSpec> disturbances{{DisturbanceClass::small, 0.5, 0.5},
                                            {DisturbanceClass::medium, 1.0, 2.0},
                                            {DisturbanceClass::large, 2.0, 15.0}};
  EntropyConfig entropy;
  RegistrationConfig registration;
  bool ground_plane_only = true;  // false perturbs all three translation axes
};

// One positive per consecutive keyframe pair at the odometry transform, one
// negative per disturbance class at the perturbed transform, no
// re-registration. Pairs whose measures are undefined are skipped.
std::vector<LabeledAlignmentSample> synthesize_training_set(const std::vector<Keyframe>& frames,
                                                            const SynthesisConfig& cfg, Rng& rng);

// L2-regularized logistic regression via iteratively reweighted least
// squares. X rows are feature vectors (bias column included by the caller),
// y holds 0/1 labels. Throws TrainingFailedError when only one class is
// present; a singular step retries with the ridge term scaled up.
Eigen::VectorXd train_logistic(const Eigen::MatrixXd& X, const std::vector<int>& y,
                               double lambda);

enum class FeatureSet { coral, cfear, all };

struct AlignmentClassifier {
  FeatureSet features = FeatureSet::all;
  Eigen::Matrix<double, 7, 1> beta = Eigen::Matrix<double, 7, 1>::Zero();  // raw-space
  Eigen::Matrix<double, 7, 1> feature_mean = Eigen::Matrix<double, 7, 1>::Zero();
  Eigen::Matrix<double, 7, 1> feature_sigma = Eigen::Matrix<double, 7, 1>::Ones();
  double lambda = 1e-4;
  std::uint64_t config_hash = 0;

  double d_align(const QualityVector& qv) const { return beta.dot(qv.to_vector()); }
  double p_align(const QualityVector& qv) const;
};

// Standardizes the active features, fits the logistic weights, and folds the
// standardization back into raw-space beta so d_align is a plain dot product.
AlignmentClassifier train_alignment_classifier(const std::vector<LabeledAlignmentSample>& samples,
                                               FeatureSet features, double lambda = 1e-4);

std::string feature_set_name(FeatureSet fs);
FeatureSet feature_set_from_name(const std::string& name);

void save_alignment_model(const AlignmentClassifier& model, const std::string& path);
AlignmentClassifier load_alignment_model(const std::string& path);

}  // namespace radarloop
