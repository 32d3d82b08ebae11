#pragma once

#include <string>
#include <utility>
#include <vector>

#include "radarloop/geometry.hpp"
#include "radarloop/keyframing.hpp"

namespace radarloop {

struct PoseGraphEdge {
  int from = -1;  // node i in the residual log(z^-1 x_i^-1 x_j)
  int to = -1;    // node j
  Se3Pose measurement;
  Mat6 information = Mat6::Identity();
  bool robust = false;  // Cauchy kernel, loop edges only
};

struct PoseGraph {
  std::vector<Se3Pose> nodes;
  std::vector<PoseGraphEdge> odometry_edges;
  std::vector<PoseGraphEdge> loop_edges;
  double cauchy_scale = 1.0;
};

// Accepted loop closure: the registration pose maps the query frame into the
// candidate frame, which is exactly the chain measurement from the earlier
// (candidate) node to the later (query) node.
struct LoopConstraint {
  int candidate_id = -1;
  int query_id = -1;
  Se3Pose query_to_candidate;
  double final_cost = 0.0;  // registration cost, used by the scaled mode
};

enum class LoopInformationMode { kFixed, kCostScaled };

struct GraphConfig {
  double odom_sigma_t = 0.02;      // m per sqrt(m) traveled
  double odom_sigma_r_deg = 0.05;  // deg per sqrt(m) traveled
  double loop_sigma_t = 0.3;       // m
  double loop_sigma_r_deg = 1.0;   // deg
  double cauchy_scale = 1.0;
  LoopInformationMode loop_information = LoopInformationMode::kFixed;
  double loop_cost_reference = 0.3;  // cost at which scaled information halves
};

// Chain edges between consecutive keyframes from their odometry poses, with
// covariance growing with the path length driven between them; one extra
// edge per accepted loop. Throws when a loop references an unknown node.
PoseGraph build_graph(const std::vector<Keyframe>& frames,
                      const std::vector<LoopConstraint>& loops, const GraphConfig& cfg = {});

Vec6 edge_residual(const Se3Pose& xi, const Se3Pose& xj, const Se3Pose& measurement);

// Jacobians of the residual for right-multiplicative increments
// x <- x * exp(delta), returned as (d r / d delta_i, d r / d delta_j).
std::pair<Mat6, Mat6> edge_jacobians(const Se3Pose& xi, const Se3Pose& xj,
                                     const Se3Pose& measurement);

struct OptimizeConfig {
  int max_iterations = 100;
  double rel_tolerance = 1e-9;
};

struct OptimizationResult {
  std::vector<Se3Pose> poses;
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> chi2_history;  // initial value plus every accepted step
};

// Sparse Levenberg-Marquardt over se(3) increments with the first node held
// fixed. chi2 is non-increasing across accepted steps; a run that exhausts
// the iteration budget returns the best iterate with converged unset.
OptimizationResult optimize(const PoseGraph& graph, const OptimizeConfig& cfg = {});

void save_g2o(const PoseGraph& graph, const std::string& path);

}  // namespace radarloop
