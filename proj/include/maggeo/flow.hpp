#pragma once

// Truncated negative gradient flow of S_k with guard sets around the
// fiberwise rotations, and a Newton polish for the discrete critical points.

#include "maggeo/action.hpp"

#include <optional>
#include <string>
#include <vector>

namespace maggeo {

struct FlowConfig {
  double delta = 1e-2;
  std::optional<double> epsilon;  // default (sqrt(2k) - 1) sqrt(delta)
  std::optional<double> T0;       // default min(epsilon / 4k, 0.1)
  double step = 1e-2;
  double grad_tol = 1e-7;
  int max_steps = 20000;
  double T_min = 1e-9;
  GradientMetric metric = GradientMetric::H1;
  // The metric on the (T, phi) factor is (dT^2 + dphi^2) / parameter_weight.
  double parameter_weight = 1.0;
  bool halve_on_increase = true;
  int max_halvings = 40;
};

/// Throws PreconditionError unless delta > 0 and k > 1/2.
void validate_flow_config(const FlowConfig& cfg, double k);
double flow_epsilon(const FlowConfig& cfg, double k);
double flow_T0(const FlowConfig& cfg, double k);

enum class FlowStatus { Critical, Truncated, BudgetExhausted, Abnormal };
std::string to_string(FlowStatus s);

struct FlowOutcome {
  ExtendedLoop terminal;
  FlowStatus status = FlowStatus::BudgetExhausted;
  std::optional<int> truncation_index;  // the a of the entered guard component
  int steps = 0;
  std::string message;
  std::vector<double> action_trace;
  std::vector<double> grad_trace;
  std::vector<double> period_trace;
  std::vector<double> energy_trace;  // Q[|gamma' + phi Z|^2]
};

struct FieldEval {
  LoopCotangent field;  // X_k = -grad S / sqrt(1 + |grad S|^2)
  double grad_norm = 0.0;
  double field_norm = 0.0;
  double action = 0.0;
};

FieldEval truncated_field(const BundleModel& bundle, const ExtendedLoop& x,
                          GradientMetric metric = GradientMetric::H1,
                          double parameter_weight = 1.0);

/// x + h X with samples retracted onto the model.
ExtendedLoop flow_step(const BundleModel& bundle, const ExtendedLoop& x, const LoopCotangent& dir,
                       double h);

FlowOutcome evolve(const BundleModel& bundle, const ExtendedLoop& x0, const FlowConfig& cfg);

/// Step-by-step form of evolve, for driving many flows in lockstep.
struct FlowRun {
  ExtendedLoop x;
  FlowOutcome out;
  bool done = false;
};
FlowRun flow_start(const BundleModel& bundle, const ExtendedLoop& x0, const FlowConfig& cfg);
/// Evaluates at run.x, records traces, then either terminates or takes one step.
void flow_advance(const BundleModel& bundle, FlowRun& run, const FlowConfig& cfg);

struct PolishConfig {
  int max_iterations = 30;
  double tol = 1e-10;  // target gradient norm in the flow metric
  double fd_step = 1e-6;
  // Relative to the largest |eigenvalue|. Central stencils barely see
  // grid-scale oscillations, so their tiny eigenvalues must not be inverted.
  double eig_cutoff = 1e-6;
};

struct PolishReport {
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;  // in the flow metric
  double dT = 0.0;
  double dphi = 0.0;
  std::string message;
};

/// Newton iteration on grad S_k = 0 in retraction coordinates, Hessian by
/// banded finite differences of the analytic gradient, pseudo-inverse solve.
ExtendedLoop newton_polish(const BundleModel& bundle, const ExtendedLoop& x0,
                           const PolishConfig& cfg, PolishReport& report,
                           GradientMetric metric = GradientMetric::H1);

struct DescendResult {
  FlowStatus status = FlowStatus::BudgetExhausted;  // critical once the polish converges
  FlowOutcome flow;
  std::optional<PolishReport> polish;
  ExtendedLoop candidate;
  CriticalResiduals residuals;
};

/// evolve, then (when the flow did not truncate and polishing is requested)
/// newton_polish from the terminal loop.
DescendResult descend(const BundleModel& bundle, const ExtendedLoop& x0, const FlowConfig& cfg,
                      const std::optional<PolishConfig>& polish);

}  // namespace maggeo
