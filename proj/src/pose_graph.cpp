#include "radarloop/pose_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "radarloop/errors.hpp"

namespace radarloop {

namespace {

Mat6 diagonal_information(double sigma_t, double sigma_r_rad) {
  Mat6 info = Mat6::Zero();
  const double it = 1.0 / (sigma_t * sigma_t);
  const double ir = 1.0 / (sigma_r_rad * sigma_r_rad);
  info.diagonal() << it, it, it, ir, ir, ir;
  return info;
}

double edge_chi2(const PoseGraphEdge& edge, const Vec6& r, double cauchy_scale) {
  const double s = r.dot(edge.information * r);
  if (!edge.robust) return s;
  const double c2 = cauchy_scale * cauchy_scale;
  return c2 * std::log1p(s / c2);
}

double robust_weight(const PoseGraphEdge& edge, const Vec6& r, double cauchy_scale) {
  if (!edge.robust) return 1.0;
  const double c2 = cauchy_scale * cauchy_scale;
  return 1.0 / (1.0 + r.dot(edge.information * r) / c2);
}

double total_chi2(const std::vector<Se3Pose>& nodes, const PoseGraph& graph,
                  double cauchy_scale) {
  double chi2 = 0.0;
  auto add = [&](const PoseGraphEdge& e) {
    const Vec6 r = edge_residual(nodes[e.from], nodes[e.to], e.measurement);
    chi2 += edge_chi2(e, r, cauchy_scale);
  };
  for (const auto& e : graph.odometry_edges) add(e);
  for (const auto& e : graph.loop_edges) add(e);
  return chi2;
}

}  // namespace

PoseGraph build_graph(const std::vector<Keyframe>& frames,
                      const std::vector<LoopConstraint>& loops, const GraphConfig& cfg) {
  if (frames.empty()) throw DataError("pose graph needs at least one keyframe");
  const double deg = M_PI / 180.0;

  PoseGraph graph;
  graph.cauchy_scale = cfg.cauchy_scale;
  graph.nodes.reserve(frames.size());
  for (const auto& kf : frames) graph.nodes.push_back(kf.odom_pose);

  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    PoseGraphEdge e;
    e.from = static_cast<int>(i);
    e.to = static_cast<int>(i + 1);
    e.measurement = frames[i].odom_pose.inverse() * frames[i + 1].odom_pose;
    const double len = std::max(frames[i + 1].path_length - frames[i].path_length, 1e-3);
    e.information = diagonal_information(cfg.odom_sigma_t * std::sqrt(len),
                                         cfg.odom_sigma_r_deg * deg * std::sqrt(len));
    graph.odometry_edges.push_back(e);
  }

  const int n = static_cast<int>(frames.size());
  for (const auto& loop : loops) {
    if (loop.candidate_id < 0 || loop.candidate_id >= n || loop.query_id < 0 ||
        loop.query_id >= n)
      throw DataError("loop references an unknown graph node");
    PoseGraphEdge e;
    e.from = loop.candidate_id;
    e.to = loop.query_id;
    e.measurement = loop.query_to_candidate;
    e.information = diagonal_information(cfg.loop_sigma_t, cfg.loop_sigma_r_deg * deg);
    if (cfg.loop_information == LoopInformationMode::kCostScaled)
      e.information *= 1.0 / (1.0 + std::max(loop.final_cost, 0.0) / cfg.loop_cost_reference);
    e.robust = true;
    graph.loop_edges.push_back(e);
  }
  return graph;
}

Vec6 edge_residual(const Se3Pose& xi, const Se3Pose& xj, const Se3Pose& measurement) {
  return se3_log(measurement.inverse() * xi.inverse() * xj);
}

std::pair<Mat6, Mat6> edge_jacobians(const Se3Pose& xi, const Se3Pose& xj,
                                     const Se3Pose& measurement) {
  const Vec6 r = edge_residual(xi, xj, measurement);
  const Mat6 jj = se3_right_jacobian_inv(r);
  const Mat6 ji = -se3_left_jacobian_inv(r) * se3_adjoint(measurement.inverse());
  return {ji, jj};
}

OptimizationResult optimize(const PoseGraph& graph, const OptimizeConfig& cfg) {
  OptimizationResult result;
  result.poses = graph.nodes;
  if (graph.nodes.empty()) {
    result.converged = true;
    return result;
  }
  const double cauchy = graph.cauchy_scale;

  double chi2 = total_chi2(result.poses, graph, cauchy);
  result.chi2_history.push_back(chi2);
  result.chi2 = chi2;
  if (chi2 <= 0.0) {
    result.converged = true;
    return result;
  }

  const int n_free = static_cast<int>(graph.nodes.size()) - 1;
  if (n_free == 0) {
    result.converged = true;
    return result;
  }
  const int dim = 6 * n_free;

  std::vector<PoseGraphEdge> edges = graph.odometry_edges;
  edges.insert(edges.end(), graph.loop_edges.begin(), graph.loop_edges.end());

  double lambda = 1e-6;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    result.iterations = iter + 1;

    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    for (const auto& e : edges) {
      const Vec6 r = edge_residual(result.poses[e.from], result.poses[e.to], e.measurement);
      const auto [ji, jj] = edge_jacobians(result.poses[e.from], result.poses[e.to],
                                           e.measurement);
      const double w = robust_weight(e, r, cauchy);
      const Mat6 wi = w * e.information;
      const int bi = 6 * (e.from - 1);
      const int bj = 6 * (e.to - 1);
      auto add_block = [&](int row, int col, const Mat6& m) {
        for (int a = 0; a < 6; ++a)
          for (int c = 0; c < 6; ++c) triplets.emplace_back(row + a, col + c, m(a, c));
      };
      if (e.from > 0) {
        add_block(bi, bi, ji.transpose() * wi * ji);
        b.segment<6>(bi) += ji.transpose() * (wi * r);
      }
      if (e.to > 0) {
        add_block(bj, bj, jj.transpose() * wi * jj);
        b.segment<6>(bj) += jj.transpose() * (wi * r);
      }
      if (e.from > 0 && e.to > 0) {
        const Mat6 off = ji.transpose() * wi * jj;
        add_block(bi, bj, off);
        add_block(bj, bi, off.transpose());
      }
    }
    Eigen::SparseMatrix<double> hessian(dim, dim);
    hessian.setFromTriplets(triplets.begin(), triplets.end());

    bool accepted = false;
    while (lambda < 1e12) {
      Eigen::SparseMatrix<double> damped = hessian;
      for (int k = 0; k < dim; ++k) damped.coeffRef(k, k) *= 1.0 + lambda;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd delta = solver.solve(-b);
      if (solver.info() != Eigen::Success || !delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }

      std::vector<Se3Pose> trial = result.poses;
      for (int k = 1; k <= n_free; ++k) {
        trial[k] = trial[k] * se3_exp(delta.segment<6>(6 * (k - 1)));
        trial[k].normalize();
      }
      const double trial_chi2 = total_chi2(trial, graph, cauchy);
      if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
        result.poses = std::move(trial);
        result.chi2_history.push_back(trial_chi2);
        const double drop = chi2 - trial_chi2;
        chi2 = trial_chi2;
        lambda = std::max(lambda * 0.5, 1e-12);
        accepted = true;
        if (drop <= cfg.rel_tolerance * std::max(chi2, 1e-300)) result.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted || result.converged) break;
  }

  result.chi2 = chi2;
  return result;
}

void save_g2o(const PoseGraph& graph, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  std::string out;
  char buf[512];
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& p = graph.nodes[i];
    std::snprintf(buf, sizeof(buf), "VERTEX_SE3:QUAT %zu %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                  i, p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.x(),
                  p.rotation.y(), p.rotation.z(), p.rotation.w());
    out += buf;
  }
  auto write_edge = [&](const PoseGraphEdge& e) {
    const auto& p = e.measurement;
    std::snprintf(buf, sizeof(buf), "EDGE_SE3:QUAT %d %d %.9g %.9g %.9g %.9g %.9g %.9g %.9g",
                  e.from, e.to, p.translation.x(), p.translation.y(), p.translation.z(),
                  p.rotation.x(), p.rotation.y(), p.rotation.z(), p.rotation.w());
    out += buf;
    for (int r = 0; r < 6; ++r)
      for (int c = r; c < 6; ++c) {
        std::snprintf(buf, sizeof(buf), " %.9g", e.information(r, c));
        out += buf;
      }
    out += "\n";
  };
  for (const auto& e : graph.odometry_edges) write_edge(e);
  for (const auto& e : graph.loop_edges) write_edge(e);
  f << out;
}

}  // namespace radarloop
