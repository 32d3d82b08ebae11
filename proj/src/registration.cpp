#include "radarloop/registration.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "radarloop/errors.hpp"
#include "radarloop/rng.hpp"

namespace radarloop {

namespace {

struct Correspondence {
  int query_index;
  int candidate_index;
  double residual;
};

double huber_cost(double r, double delta) {
  const double a = std::abs(r);
  if (a <= delta) return 0.5 * r * r;
  return delta * (a - 0.5 * delta);
}

double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  if (a <= delta) return 1.0;
  return delta / a;
}

struct Association {
  std::vector<Correspondence> matches;
  double mean_cost = std::numeric_limits<double>::infinity();
};

Association associate(const std::vector<SurfacePoint>& query,
                      const std::vector<SurfacePoint>& candidate, const SpatialGrid& grid,
                      const Se3Pose& pose, const RegistrationConfig& cfg) {
  Association out;
  std::vector<int> nearby;
  double total = 0.0;
  for (int qi = 0; qi < static_cast<int>(query.size()); ++qi) {
    const Vec3 y = pose.apply(query[qi].mean);
    grid.query(y, cfg.correspondence_radius, nearby);
    int best = -1;
    double best_d2 = cfg.correspondence_radius * cfg.correspondence_radius;
    for (int ci : nearby) {
      const double d2 = (candidate[ci].mean - y).squaredNorm();
      if (d2 <= best_d2) {
        best_d2 = d2;
        best = ci;
      }
    }
    if (best < 0) continue;
    const double r = candidate[best].normal.dot(y - candidate[best].mean);
    out.matches.push_back({qi, best, r});
    total += huber_cost(r, cfg.huber_delta);
  }
  if (!out.matches.empty()) out.mean_cost = total / static_cast<double>(out.matches.size());
  return out;
}

// Truncated-eigenvalue solve of H d = -g so directions the scene does not
// constrain stay at zero instead of blowing up.
Vec6 solve_step(const Mat6& H, const Vec6& g) {
  Eigen::SelfAdjointEigenSolver<Mat6> eig(H);
  const Vec6 evals = eig.eigenvalues();
  const double lmax = evals.maxCoeff();
  if (!(lmax > 0.0)) return Vec6::Zero();
  const double floor = 1e-10 * lmax;
  Vec6 step = Vec6::Zero();
  for (int i = 0; i < 6; ++i) {
    if (evals[i] <= floor) continue;
    const Vec6 v = eig.eigenvectors().col(i);
    step -= v * (v.dot(g) / evals[i]);
  }
  return step;
}

}  // namespace

RegistrationResult register_p2d(const std::vector<SurfacePoint>& query,
                                const std::vector<SurfacePoint>& candidate,
                                const Se3Pose& initial_guess, const RegistrationConfig& cfg) {
  RegistrationResult result;
  result.average_set_size = 0.5 * (static_cast<double>(query.size()) +
                                   static_cast<double>(candidate.size()));
  std::vector<Vec3> candidate_means(candidate.size());
  for (std::size_t i = 0; i < candidate.size(); ++i) candidate_means[i] = candidate[i].mean;
  SpatialGrid grid(&candidate_means, cfg.correspondence_radius);

  Se3Pose pose = initial_guess;
  pose.normalize();
  Association assoc = associate(query, candidate, grid, pose, cfg);
  if (assoc.matches.empty())
    throw NoOverlapError("no correspondences within radius at the initial guess");
  result.cost_history.push_back(assoc.mean_cost);

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    result.iterations = iter + 1;
    Mat6 H = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (const auto& m : assoc.matches) {
      const Vec3 y = pose.apply(query[m.query_index].mean);
      const Vec3& n = candidate[m.candidate_index].normal;
      Vec6 J;
      J.head<3>() = n;
      J.tail<3>() = y.cross(n);
      const double w = huber_weight(m.residual, cfg.huber_delta);
      H += w * J * J.transpose();
      g += w * J * m.residual;
    }
    Vec6 step = solve_step(H, g);
    if (step.norm() < cfg.step_tolerance) {
      result.converged = true;
      break;
    }

    bool accepted = false;
    for (int h = 0; h <= cfg.max_step_halvings; ++h) {
      Se3Pose trial = se3_exp(step) * pose;
      trial.normalize();
      Association trial_assoc = associate(query, candidate, grid, trial, cfg);
      if (trial_assoc.mean_cost <= assoc.mean_cost + 1e-15) {
        pose = trial;
        assoc = std::move(trial_assoc);
        result.cost_history.push_back(assoc.mean_cost);
        accepted = true;
        if (step.norm() < cfg.step_tolerance) result.converged = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || result.converged) break;
  }

  result.pose = pose;
  result.final_cost = assoc.mean_cost;
  result.correspondences = static_cast<int>(assoc.matches.size());
  return result;
}

P2dMeasures evaluate_p2d_measures(const std::vector<SurfacePoint>& query,
                                  const std::vector<SurfacePoint>& candidate,
                                  const Se3Pose& pose, const RegistrationConfig& cfg) {
  P2dMeasures out;
  out.average_set_size = 0.5 * (static_cast<double>(query.size()) +
                                static_cast<double>(candidate.size()));
  std::vector<Vec3> candidate_means(candidate.size());
  for (std::size_t i = 0; i < candidate.size(); ++i) candidate_means[i] = candidate[i].mean;
  SpatialGrid grid(&candidate_means, cfg.correspondence_radius);
  Association assoc = associate(query, candidate, grid, pose, cfg);
  out.correspondences = static_cast<int>(assoc.matches.size());
  out.cost = assoc.matches.empty() ? huber_cost(cfg.correspondence_radius, cfg.huber_delta)
                                   : assoc.mean_cost;
  return out;
}

double registration_jacobian_check(std::uint64_t seed, double fd_step) {
  Rng rng(seed);
  const int n = 30;
  std::vector<SurfacePoint> query(n), candidate(n);
  for (int i = 0; i < n; ++i) {
    Vec3 mu(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-2.0, 2.0));
    Vec3 nrm(rng.normal(), rng.normal(), rng.normal());
    nrm.normalize();
    query[i] = {mu, nrm, 8};
    Vec3 mu_c = mu + 0.3 * Vec3(rng.normal(), rng.normal(), rng.normal());
    Vec3 nrm_c(rng.normal(), rng.normal(), rng.normal());
    nrm_c.normalize();
    candidate[i] = {mu_c, nrm_c, 8};
  }
  Vec6 xi;
  for (int k = 0; k < 6; ++k) xi[k] = 0.1 * rng.normal();
  const Se3Pose pose = se3_exp(xi);

  auto residual = [&](int i, const Se3Pose& T) {
    return candidate[i].normal.dot(T.apply(query[i].mean) - candidate[i].mean);
  };

  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 y = pose.apply(query[i].mean);
    const Vec3& nrm = candidate[i].normal;
    Vec6 J;
    J.head<3>() = nrm;
    J.tail<3>() = y.cross(nrm);
    for (int k = 0; k < 6; ++k) {
      Vec6 dxi = Vec6::Zero();
      dxi[k] = fd_step;
      const double rp = residual(i, se3_exp(dxi) * pose);
      const double rm = residual(i, se3_exp(Vec6(-dxi)) * pose);
      const double fd = (rp - rm) / (2.0 * fd_step);
      const double err = std::abs(fd - J[k]) / std::max(1.0, std::abs(J[k]));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace radarloop
