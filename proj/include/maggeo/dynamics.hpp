#pragma once

// ODE integration: the magnetic flow on TM, the geodesic flow of g^theta on
// T*E, and the shooting oracle for closed magnetic geodesics.

#include "maggeo/geometry.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace maggeo {

enum class Representation { Tangent, Cotangent };

struct PhaseState {
  Vec position;
  Vec vector;  // velocity or momentum, per rep
  Representation rep = Representation::Tangent;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<PhaseState> states;
  std::vector<std::string> invariant_names;
  std::vector<std::vector<double>> invariants;  // one row per sample

  std::size_t size() const { return times.size(); }
  /// max_t |I(t) - I(0)| for the named invariant.
  double drift(const std::string& name) const;
};

/// RK4 for mu'' + Gamma(mu', mu') = Y mu'. The step is shrunk so that the
/// final sample lands on `duration`; every `record_every`-th step is kept.
Trajectory integrate_magnetic(const ManifoldModel& model, const Vec& q0, const Vec& v0,
                              double duration, double step, int record_every = 1);

/// RK4 for the cotangent geodesic flow of H = |p|^2 / 2; records H and A = <p, Z>.
Trajectory integrate_lifted_geodesic(const BundleModel& bundle, const PhaseState& s0,
                                     double duration, double step, int record_every = 1);

/// Single time-`duration` map of the magnetic flow with a fixed number of steps.
PhaseState magnetic_flow_map(const ManifoldModel& model, const Vec& q0, const Vec& v0,
                             double duration, int steps);

struct ReductionComparison {
  double sup_distance = 0.0;
  double reduced_energy = 0.0;  // kbar = H(state0) - 1/2
};

/// Sup over samples of |Pi_1(lifted flow) - magnetic flow|, both in base
/// coordinates, positions and velocities.
ReductionComparison compare_reduction(const BundleModel& bundle, const PhaseState& s0,
                                      double duration, double step, double tol = 1e-8);

/// Max |nabla_t v - Y v| along sampled (x_i, v_i) with spacing dt, using
/// fourth-order differences of v at interior samples.
double magnetic_ode_residual(const ManifoldModel& model, const std::vector<Vec>& x,
                             const std::vector<Vec>& v, double dt);

struct ShootConfig {
  int steps = 4000;  // RK4 steps over one period
  double tol = 1e-8;
  int max_iterations = 40;
  double fd_step = 1e-7;
  double min_period_fraction = 0.1;
};

struct ShootResult {
  bool converged = false;
  Vec q;
  Vec v;
  double period = 0.0;
  double residual = 0.0;
  int iterations = 0;
  std::string message;
};

/// Gauss-Newton on the return map over (base position, velocity angle, T)
/// at fixed speed sqrt(2 kbar).
ShootResult shoot_closed_orbit(const ManifoldModel& model, double kbar, const Vec& q0,
                               const Vec& v0, double period, const ShootConfig& cfg = {});

struct CurvatureStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// kappa_g = |nabla_t v| / |v|^2 measured from sampled velocities by
/// fourth-order differences (periodic when the samples close up).
CurvatureStats measure_geodesic_curvature(const ManifoldModel& model,
                                          const std::vector<Vec>& x, const std::vector<Vec>& v,
                                          double dt, bool periodic);

struct LiftedOrbit {
  Eigen::MatrixXd samples;  // ambient_dim x N, fiber-corrected
  double period = 0.0;
  double phi = 0.0;
  double k = 0.0;
  Vec q0;  // initial point upstairs
  Vec p0;  // initial momentum upstairs, A = 1
};

/// Horizontal lift of a base orbit (q0, v0, T) to a critical point of S_k:
/// p0 = G h + theta, phi = fiber holonomy, y(t) = e^{-i t phi} x(t T).
LiftedOrbit lift_orbit(const BundleModel& bundle, const Vec& q0, const Vec& v0, double period,
                       int n, double step = 1e-3);

/// max |y'(t) - (-phi Z(y) + T q'(y))| for the rescaled curve of a lifted
/// geodesic, y' by fourth-order differences over `samples` points.
double rescaling_residual(const BundleModel& bundle, const PhaseState& s0, double period,
                          double phi, int samples, double step = 1e-3);

/// Columns: t, position coordinates, vector coordinates, invariants.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace maggeo
