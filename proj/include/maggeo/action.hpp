#pragma once

// The discrete extended loop space: loops in E with a free period T and a
// phase multiplier phi, the functional
//
//   S_k(gamma, T, phi) = (1/2T) Q[|gamma' + phi Z|^2] - phi + k T,
//
// its gradient, critical-point residuals, the Heisenberg action and the
// Legendre lift to phase space.

#include "maggeo/dynamics.hpp"
#include "maggeo/geometry.hpp"

#include <optional>

namespace maggeo {

/// Samples gamma(i / N), i = 0..N-1, as ambient columns. The sample at index
/// j outside [0, N) is deck^{floor(j/N)}(samples(j mod N)), so loops crossing
/// a seam are stored unwrapped.
struct ExtendedLoop {
  Eigen::MatrixXd samples;
  double T = 1.0;
  double phi = 0.0;
  double k = 1.0;
  Winding winding{0, 0, 0};

  int size() const { return static_cast<int>(samples.cols()); }
};

/// Finite-difference order of the periodic derivative stencils (2 or 4).
int stencil_order();
void set_stencil_order(int order);

enum class GradientMetric { L2, H1 };

struct LoopCotangent {
  Eigen::MatrixXd loop;  // ambient_dim x N
  double dT = 0.0;
  double dphi = 0.0;
  GradientMetric metric = GradientMetric::L2;
};

/// Throws PreconditionError on T <= 0, N < 8, non-finite entries or
/// samples off the model's constraint set.
void validate_loop(const BundleModel& bundle, const ExtendedLoop& x);

/// Sample j with deck transformations applied for j outside [0, N).
Vec loop_sample(const BundleModel& bundle, const ExtendedLoop& x, int j);

/// Periodic first and second derivatives d/ds of the samples (s in [0, 1]).
Eigen::MatrixXd loop_derivative(const BundleModel& bundle, const ExtendedLoop& x);
Eigen::MatrixXd loop_second_derivative(const BundleModel& bundle, const ExtendedLoop& x);

/// Q[|gamma' + phi Z|^2].
double loop_energy(const BundleModel& bundle, const ExtendedLoop& x);

double action_eval(const BundleModel& bundle, const ExtendedLoop& x);

/// Raw partial derivatives: sum_i <loop_i, xi_i> + dT tau + dphi psi is the
/// directional derivative. On constrained models the loop part is tangent.
LoopCotangent action_differential(const BundleModel& bundle, const ExtendedLoop& x);

/// Riesz representative of the differential for the chosen loop metric.
/// L2: <xi, eta> = (1/N) sum xi_i . eta_i. H1 adds N^2 (xi_{i+1} - xi_i) . (eta_{i+1} - eta_i).
LoopCotangent riesz_gradient(const BundleModel& bundle, const ExtendedLoop& x,
                             const LoopCotangent& differential, GradientMetric metric);

LoopCotangent action_gradient(const BundleModel& bundle, const ExtendedLoop& x,
                              GradientMetric metric = GradientMetric::H1);

/// |grad S|^2 in the gradient's metric.
double gradient_norm_sq(const LoopCotangent& differential, const LoopCotangent& gradient);

/// sum_i <d_i, xi_i> + dT tau + dphi psi.
double pairing(const LoopCotangent& differential, const Eigen::MatrixXd& xi, double tau,
               double psi);

struct CriticalResiduals {
  double fiber_speed = 0.0;      // max |<gamma', Z> - (T - phi)|
  double energy_density = 0.0;   // max ||gamma' + phi Z|^2 - 2 T^2 k|
  double magnetic_ode = 0.0;     // max |nabla_t mu' - Y mu'|
  double base_energy = 0.0;      // max |(1/2)|mu'|^2 - (k - 1/2)|
  double max() const;
};

CriticalResiduals critical_residuals(const BundleModel& bundle, const ExtendedLoop& x);

/// Geodesic curvature |nabla_t mu'| / |mu'|^2 of the projected curve
/// mu(t) = tau(gamma(t / T)), from the periodic stencils.
CurvatureStats loop_geodesic_curvature(const BundleModel& bundle, const ExtendedLoop& x);

/// (r, s, u) . (gamma, T, phi) = (e^{2 pi i (u t + r)} gamma(t + s), T, phi - 2 pi u).
/// Off-grid shifts s use cyclic cubic interpolation.
ExtendedLoop heisenberg_act(const BundleModel& bundle, const ExtendedLoop& x, double r, double s,
                            int u);

/// gamma(t) = e^{-2 pi i a t} q0 with phi = 2 pi a: gamma' + phi Z = 0.
ExtendedLoop fiberwise_rotation(const BundleModel& bundle, const Vec& q0, int a, double T,
                                double k, int n);

/// Returns a with Q[|gamma' + phi Z|^2] < delta and |phi - 2 pi a| < sqrt(delta),
/// or nothing when the loop energy is at least delta.
std::optional<int> guard_membership(const BundleModel& bundle, const ExtendedLoop& x,
                                    double delta);

struct PhaseLoop {
  Eigen::MatrixXd q;
  Eigen::MatrixXd p;
  Winding winding{0, 0, 0};
};

/// p_i = G (gamma'_i + phi Z_i) / T.
PhaseLoop legendre_lift(const BundleModel& bundle, const ExtendedLoop& x);

/// Q[<p, gamma'>] - Q[T (H - k) - phi (A - 1)] on the same grid as S_k.
double rabinowitz_eval(const BundleModel& bundle, const PhaseLoop& y, const ExtendedLoop& x);

/// (d/dT, d/dphi) of the Rabinowitz functional: (-Q[H - k], Q[A - 1]).
std::pair<double, double> rabinowitz_partials(const BundleModel& bundle, const PhaseLoop& y,
                                              double k);

/// Critical point from a lifted base orbit (see lift_orbit).
ExtendedLoop loop_from_orbit(const LiftedOrbit& orbit);

}  // namespace maggeo
