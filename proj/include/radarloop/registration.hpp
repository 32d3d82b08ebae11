#pragma once

#include <vector>

#include "radarloop/keyframing.hpp"

namespace radarloop {

struct RegistrationConfig {
  double correspondence_radius = 2.0;  // m
  double huber_delta = 0.3;            // m
  int max_iterations = 50;
  double step_tolerance = 1e-6;
  int max_step_halvings = 5;
};

struct RegistrationResult {
  Se3Pose pose;  // maps query-frame points into the candidate frame
  double final_cost = 0.0;        // C_f: mean robust cost at the final pose
  int correspondences = 0;        // C_o
  double average_set_size = 0.0;  // C_a: (|query| + |candidate|) / 2
  bool converged = false;
  int iterations = 0;
  std::vector<double> cost_history;  // objective after each accepted step
};

// Gauss-Newton over se(3) on residuals n_c . (T mu_q - mu_c) with a Huber
// kernel; nearest-within-radius association is rebuilt every evaluation.
// Throws NoOverlapError when the initial guess yields no correspondences.
RegistrationResult register_p2d(const std::vector<SurfacePoint>& query,
                                const std::vector<SurfacePoint>& candidate,
                                const Se3Pose& initial_guess, const RegistrationConfig& cfg);

struct P2dMeasures {
  double cost = 0.0;  // mean robust cost; worst-case value when no matches
  int correspondences = 0;
  double average_set_size = 0.0;
};

// The registration quality measures at a fixed pose, no optimization.
P2dMeasures evaluate_p2d_measures(const std::vector<SurfacePoint>& query,
                                  const std::vector<SurfacePoint>& candidate,
                                  const Se3Pose& pose, const RegistrationConfig& cfg);

// Max relative error between the analytic residual Jacobian and central
// finite differences on a randomized instance.
double registration_jacobian_check(std::uint64_t seed, double fd_step = 1e-6);

}  // namespace radarloop
