#pragma once

// Minimax over pinned loop families on the Hopf bundle: the join sweepout of
// S^3 by circles, its evolution under the truncated flow, and a k-sweep.

#include "maggeo/dynamics.hpp"
#include "maggeo/flow.hpp"

#include <optional>
#include <string>
#include <vector>

namespace maggeo {

/// Nodes on an m x m polar grid (rho_i = i / (m - 1), psi_j = 2 pi j / m),
/// row-major in i. The node at disk point w = rho e^{i psi} carries the loop
/// t -> (w, sqrt(1 - rho^2) e^{-2 pi i t}) in C^2: the row rho = 0 is the Hopf
/// fiber through (0, 1), the row rho = 1 the pinned constant loops.
struct LoopFamily {
  int m = 0;
  double k = 1.0;
  double T0 = 0.0;
  std::vector<ExtendedLoop> nodes;
  std::vector<bool> boundary;
  Eigen::MatrixXd disk;  // 2 x m^2 disk coordinates

  int size() const { return static_cast<int>(nodes.size()); }
};

/// Throws PreconditionError when m < 8, n < 8 or k <= 1/2.
LoopFamily build_family(const HopfSphereBundle& hopf, int m, double k, int n, double T0);

/// Throws PreconditionError when a boundary node has positive loop energy,
/// phi != 0 or T > T0, when k differs between nodes, or when no interior node
/// is a non-constant loop.
void validate_family(const BundleModel& bundle, const LoopFamily& family);

/// Flow defaults for families: max_steps is the budget R, and the (T, phi)
/// weight lets the period and fiber angle of the fresh family (T0, 0) relax
/// before the loops collapse.
inline FlowConfig minimax_flow_defaults() {
  FlowConfig f;
  f.step = 0.05;
  f.max_steps = 400;
  f.parameter_weight = 10.0;
  return f;
}

struct MinimaxConfig {
  FlowConfig flow = minimax_flow_defaults();
  int threads = 0;  // 0: hardware concurrency
  bool polish_candidate = true;
  PolishConfig polish;
  double stagnation_grad = 0.5;  // top-node grad norm counted as stagnation
  bool enforce_lower_bound = true;
};

struct MinimaxCandidate {
  int node = -1;
  ExtendedLoop loop;
  double action = 0.0;
  double grad_norm = 0.0;  // before polishing
  std::optional<PolishReport> polish;
  CriticalResiduals residuals;
  CurvatureStats curvature;
  double expected_curvature = 0.0;  // strength / sqrt(2 kbar)
  std::string status;
};

struct MinimaxRecord {
  double k = 1.0;
  int m = 0;
  int n = 0;
  double epsilon = 0.0;
  double T0 = 0.0;
  double initial_max = 0.0;
  double c_estimate = 0.0;
  std::vector<double> max_trace;   // max over the family per flow step
  std::vector<int> argmax_trace;
  std::vector<double> top_grad_trace;  // grad norm of the argmax node
  int selection_step = 0;  // step where the argmax node was closest to critical
  double selection_grad = 0.0;
  int argmax_node = -1;             // argmax at selection_step
  std::vector<int> near_max_nodes;  // within epsilon / 2 of the max at selection_step
  bool near_max_unguarded = true;   // guard_membership is none at all of them
  int truncated_nodes = 0;
  int critical_nodes = 0;
  int abnormal_nodes = 0;
  bool stagnated = false;  // selection_grad < stagnation_grad at bounded T
  std::optional<MinimaxCandidate> candidate;
};

/// Evolves the interior nodes in lockstep (boundary nodes held fixed) for the
/// configured budget. On a finite grid the family eventually tears (every node
/// leaves the saddle region), so the level is read where the top of the family
/// is most nearly critical: c_estimate is the min of the family max up to
/// selection_step, and the argmax node there is the candidate. Throws
/// GeometryError if c_estimate < epsilon and enforce_lower_bound is set.
MinimaxRecord family_minimax_descent(const HopfSphereBundle& hopf, const LoopFamily& family,
                                     const MinimaxConfig& cfg);

struct SweepResult {
  std::vector<MinimaxRecord> records;
  bool monotone = true;          // c_estimate non-decreasing within tolerance
  std::vector<double> slopes;    // one-sided difference quotients of c
  std::vector<int> flagged;      // indices of stagnated records
  std::vector<double> period_window;  // upper bound on T per record: M + 3
};

/// Fresh family per k. Throws PreconditionError unless k_grid is increasing and
/// every k exceeds 1/2.
SweepResult struwe_sweep(const HopfSphereBundle& hopf, const std::vector<double>& k_grid, int m,
                         int n, const MinimaxConfig& cfg, double monotone_tol = 1e-6);

}  // namespace maggeo
