#include "radarloop/alignment.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "radarloop/errors.hpp"

namespace radarloop {

namespace {

constexpr double kTwoPiECubed = 248.05021344239853;  // (2*pi*e)^3

double neighborhood_entropy(const std::vector<Vec3>& pts, double det_floor) {
  Vec3 mu = Vec3::Zero();
  for (const auto& p : pts) mu += p;
  mu /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) {
    const Vec3 d = p - mu;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());
  const double det = std::max(cov.determinant(), det_floor);
  return 0.5 * std::log(kTwoPiECubed * det);
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

std::vector<int> active_features(FeatureSet fs) {
  switch (fs) {
    case FeatureSet::coral:
      return {0, 1, 2};
    case FeatureSet::cfear:
      return {3, 4, 5};
    case FeatureSet::all:
      return {0, 1, 2, 3, 4, 5};
  }
  throw ConfigError("unknown feature set");
}

}  // namespace

EntropyMeasures compute_entropy_measures(const std::vector<Vec3>& cloud_a,
                                         const std::vector<Vec3>& cloud_b, const Se3Pose& pose,
                                         const EntropyConfig& cfg) {
  if (cloud_a.empty() || cloud_b.empty())
    throw MeasuresUndefinedError("entropy measures need two non-empty clouds");

  std::vector<Vec3> b_in_a(cloud_b.size());
  for (std::size_t i = 0; i < cloud_b.size(); ++i) b_in_a[i] = pose.apply(cloud_b[i]);

  SpatialGrid grid_a(&cloud_a, cfg.radius);
  SpatialGrid grid_b(&b_in_a, cfg.radius);

  double sum_sep = 0.0, sum_joint = 0.0;
  int eligible = 0;
  int with_cross = 0;
  int total = 0;
  std::vector<int> own_idx, cross_idx;
  std::vector<Vec3> neigh;

  auto visit = [&](const std::vector<Vec3>& own_cloud, const SpatialGrid& own_grid,
                   const std::vector<Vec3>& cross_cloud, const SpatialGrid& cross_grid) {
    for (const auto& p : own_cloud) {
      ++total;
      own_grid.query(p, cfg.radius, own_idx);
      cross_grid.query(p, cfg.radius, cross_idx);
      if (!cross_idx.empty()) ++with_cross;
      if (static_cast<int>(own_idx.size()) < cfg.min_neighbors) continue;
      neigh.clear();
      for (int i : own_idx) neigh.push_back(own_cloud[i]);
      sum_sep += neighborhood_entropy(neigh, cfg.det_floor);
      for (int i : cross_idx) neigh.push_back(cross_cloud[i]);
      sum_joint += neighborhood_entropy(neigh, cfg.det_floor);
      ++eligible;
    }
  };
  visit(cloud_a, grid_a, b_in_a, grid_b);
  visit(b_in_a, grid_b, cloud_a, grid_a);

  if (eligible == 0)
    throw MeasuresUndefinedError("no point has a dense enough neighborhood");

  EntropyMeasures out;
  out.h_separate = sum_sep / eligible;
  out.h_joint = sum_joint / eligible;
  out.h_overlap = static_cast<double>(with_cross) / static_cast<double>(total);
  return out;
}

Eigen::Matrix<double, 7, 1> QualityVector::to_vector() const {
  Eigen::Matrix<double, 7, 1> v;
  v << h_joint, h_separate, h_overlap, c_f, c_o, c_a, 1.0;
  return v;
}

QualityVector assemble_quality_vector(const std::vector<Vec3>& candidate_cloud,
                                      const std::vector<Vec3>& query_cloud,
                                      const std::vector<SurfacePoint>& candidate_surface,
                                      const std::vector<SurfacePoint>& query_surface,
                                      const Se3Pose& query_to_candidate, const EntropyConfig& ecfg,
                                      const RegistrationConfig& rcfg) {
  const EntropyMeasures em =
      compute_entropy_measures(candidate_cloud, query_cloud, query_to_candidate, ecfg);
  const P2dMeasures pm =
      evaluate_p2d_measures(query_surface, candidate_surface, query_to_candidate, rcfg);
  QualityVector qv;
  qv.h_joint = em.h_joint;
  qv.h_separate = em.h_separate;
  qv.h_overlap = em.h_overlap;
  qv.c_f = pm.cost;
  qv.c_o = static_cast<double>(pm.correspondences);
  qv.c_a = pm.average_set_size;
  return qv;
}

std::vector<LabeledAlignmentSample> synthesize_training_set(const std::vector<Keyframe>& frames,
                                                            const SynthesisConfig& cfg, Rng& rng) {
  if (frames.size() < 2) throw DataError("training synthesis needs at least two keyframes");

  std::vector<LabeledAlignmentSample> samples;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    const Keyframe& cand = frames[i];
    const Keyframe& query = frames[i + 1];
    const Se3Pose t_odom = cand.odom_pose.inverse() * query.odom_pose;
    const std::vector<Vec3> cand_cloud = positions_of(cand.inlier_cloud);
    const std::vector<Vec3> query_cloud = positions_of(query.inlier_cloud);

    try {
      LabeledAlignmentSample s;
      s.qv = assemble_quality_vector(cand_cloud, query_cloud, cand.surface_points,
                                     query.surface_points, t_odom, cfg.entropy,
                                     cfg.registration);
      s.aligned = true;
      s.disturbance = DisturbanceClass::none;
      s.pair_index = static_cast<int>(i);
      s.pose = t_odom;
      samples.push_back(std::move(s));
    } catch (const MeasuresUndefinedError&) {
    }

    for (const auto& spec : cfg.disturbances) {
      Vec3 dir;
      if (cfg.ground_plane_only) {
        const double theta = rng.uniform(0.0, 2.0 * M_PI);
        dir = Vec3(std::cos(theta), std::sin(theta), 0.0);
      } else {
        dir = Vec3(rng.normal(), rng.normal(), rng.normal());
        while (dir.norm() < 1e-9) dir = Vec3(rng.normal(), rng.normal(), rng.normal());
        dir.normalize();
      }
      const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
      Se3Pose d;
      d.translation = spec.translation * dir;
      d.rotation = yaw_quat(sign * spec.yaw_deg * M_PI / 180.0);
      const Se3Pose pose_neg = d * t_odom;
      try {
        LabeledAlignmentSample s;
        s.qv = assemble_quality_vector(cand_cloud, query_cloud, cand.surface_points,
                                       query.surface_points, pose_neg, cfg.entropy,
                                       cfg.registration);
        s.aligned = false;
        s.disturbance = spec.cls;
        s.pair_index = static_cast<int>(i);
        s.pose = pose_neg;
        samples.push_back(std::move(s));
      } catch (const MeasuresUndefinedError&) {
      }
    }
  }
  return samples;
}

Eigen::VectorXd train_logistic(const Eigen::MatrixXd& X, const std::vector<int>& y,
                               double lambda) {
  const auto n = X.rows();
  const auto d = X.cols();
  if (static_cast<std::size_t>(n) != y.size())
    throw DataError("label count does not match the design matrix");
  bool has0 = false, has1 = false;
  for (int label : y) (label ? has1 : has0) = true;
  if (!has0 || !has1) throw TrainingFailedError("both classes are required for training");

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)];

  for (int iter = 0; iter < 500; ++iter) {
    const Eigen::VectorXd t = X * w;
    Eigen::VectorXd p(n), wt(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = logistic(t[i]);
      wt[i] = std::max(p[i] * (1.0 - p[i]), 1e-12);
    }
    const Eigen::VectorXd grad = X.transpose() * (yv - p) - lambda * w;
    const Eigen::MatrixXd base = X.transpose() * wt.asDiagonal() * X;

    Eigen::VectorXd step;
    double ridge = std::max(lambda, 1e-12);
    bool solved = false;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::MatrixXd H = base + ridge * Eigen::MatrixXd::Identity(d, d);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      if (ldlt.info() == Eigen::Success) {
        step = ldlt.solve(grad);
        if (step.allFinite()) {
          solved = true;
          break;
        }
      }
      ridge *= 10.0;
    }
    if (!solved) throw TrainingFailedError("normal equations remained singular");

    w += step;
    if (step.norm() < 1e-8) return w;
  }
  return w;
}

double AlignmentClassifier::p_align(const QualityVector& qv) const {
  return logistic(d_align(qv));
}

AlignmentClassifier train_alignment_classifier(const std::vector<LabeledAlignmentSample>& samples,
                                               FeatureSet features, double lambda) {
  const std::vector<int> active = active_features(features);
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto k = static_cast<Eigen::Index>(active.size());

  Eigen::MatrixXd raw(n, k);
  std::vector<int> y(samples.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto v = samples[static_cast<std::size_t>(i)].qv.to_vector();
    for (Eigen::Index j = 0; j < k; ++j) raw(i, j) = v[active[static_cast<std::size_t>(j)]];
    y[static_cast<std::size_t>(i)] = samples[static_cast<std::size_t>(i)].aligned ? 1 : 0;
  }

  AlignmentClassifier model;
  model.features = features;
  model.lambda = lambda;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(k), sigma = Eigen::VectorXd::Ones(k);
  if (n > 0) {
    mu = raw.colwise().mean();
    for (Eigen::Index j = 0; j < k; ++j) {
      const double var = (raw.col(j).array() - mu[j]).square().mean();
      sigma[j] = std::sqrt(var) < 1e-12 ? 1.0 : std::sqrt(var);
    }
  }

  Eigen::MatrixXd X(n, k + 1);
  for (Eigen::Index j = 0; j < k; ++j) X.col(j) = (raw.col(j).array() - mu[j]) / sigma[j];
  X.col(k).setOnes();

  const Eigen::VectorXd w = train_logistic(X, y, lambda);

  double bias = w[k];
  for (Eigen::Index j = 0; j < k; ++j) {
    const int slot = active[static_cast<std::size_t>(j)];
    model.beta[slot] = w[j] / sigma[j];
    model.feature_mean[slot] = mu[j];
    model.feature_sigma[slot] = sigma[j];
    bias -= w[j] * mu[j] / sigma[j];
  }
  model.beta[6] = bias;

  std::uint64_t h = 0x9e3779b97f4a7c15ULL * (samples.size() + 1);
  h ^= static_cast<std::uint64_t>(features) + 0x517cc1b727220a95ULL + (h << 6) + (h >> 2);
  h ^= std::bit_cast<std::uint64_t>(lambda) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  model.config_hash = h;
  return model;
}

std::string feature_set_name(FeatureSet fs) {
  switch (fs) {
    case FeatureSet::coral:
      return "coral";
    case FeatureSet::cfear:
      return "cfear";
    case FeatureSet::all:
      return "all";
  }
  throw ConfigError("unknown feature set");
}

FeatureSet feature_set_from_name(const std::string& name) {
  if (name == "coral") return FeatureSet::coral;
  if (name == "cfear") return FeatureSet::cfear;
  if (name == "all") return FeatureSet::all;
  throw ConfigError("unknown feature set: " + name);
}

void save_alignment_model(const AlignmentClassifier& model, const std::string& path) {
  nlohmann::json j;
  j["feature_set"] = feature_set_name(model.features);
  j["lambda"] = model.lambda;
  j["config_hash"] = model.config_hash;
  for (int i = 0; i < 7; ++i) {
    j["beta"].push_back(model.beta[i]);
    j["feature_mean"].push_back(model.feature_mean[i]);
    j["feature_sigma"].push_back(model.feature_sigma[i]);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << j.dump(2) << "\n";
}

AlignmentClassifier load_alignment_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file: " + std::string(e.what()));
  }
  AlignmentClassifier model;
  try {
    model.features = feature_set_from_name(j.at("feature_set").get<std::string>());
    model.lambda = j.at("lambda").get<double>();
    model.config_hash = j.at("config_hash").get<std::uint64_t>();
    for (int i = 0; i < 7; ++i) {
      model.beta[i] = j.at("beta").at(i).get<double>();
      model.feature_mean[i] = j.at("feature_mean").at(i).get<double>();
      model.feature_sigma[i] = j.at("feature_sigma").at(i).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file missing fields: " + std::string(e.what()));
  }
  if (!model.beta.allFinite()) throw DataError("model weights are not finite");
  return model;
}

}  // namespace radarloop
