#pragma once

// Stability of the level set Sigma = {H = k, A = 1} in T*E: the 2 x 2 matrix
// [[a0(X0), a0(X1)], [a1(X0), a1(X1)]], the flat torus contact pair and the
// SU(2) stable pair.

#include "maggeo/geometry.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace maggeo {

/// Phase points are stacked z = (q, p); tangent vectors xi = (dq, dp).
using PhaseVec = Eigen::VectorXd;

struct SigmaSample {
  Vec q;
  Vec p;
  double H_residual = 0.0;
  double A_residual = 0.0;
  PhaseVec X0;  // Hamiltonian field of H
  PhaseVec X1;  // Hamiltonian field of A, the lifted S^1 generator

  PhaseVec z() const;
};

using OneForm = std::function<double(const PhaseVec& z, const PhaseVec& xi)>;

struct FormPair {
  OneForm alpha0;
  OneForm alpha1;
  std::string tag;  // liouville | liouville-plus-pullback | su2-stable-pair
};

struct StabilityMatrix {
  Eigen::Matrix2d m;
  double det = 0.0;
};

StabilityMatrix stability_matrix(const SigmaSample& s, const FormPair& forms);

/// lambda(xi) = <p, dq>.
double liouville(const PhaseVec& z, const PhaseVec& xi);

/// omega(xi, eta) = <dp_xi, dq_eta> - <dp_eta, dq_xi> = d lambda (xi, eta).
double canonical_two_form(const PhaseVec& xi, const PhaseVec& eta);

/// d alpha(xi, eta) with xi, eta extended as constant fields, by central
/// differences with the given step.
double exterior_derivative(const OneForm& alpha, const PhaseVec& z, const PhaseVec& xi,
                           const PhaseVec& eta,
                           double step = 1e-4);

// ---- flat torus ----

/// Base point uniform in the fundamental domain, horizontal momentum uniform
/// on the circle of radius sqrt(2k - 1), vertical momentum 1.
std::vector<SigmaSample> sample_torus_sigma(const FlatTorusBundle& bundle, double k, int count,
                                            std::uint64_t seed);

/// Angle of the horizontal momentum (p_x, p_y - s x p_z).
double torus_momentum_angle(const FlatTorusBundle& bundle, const PhaseVec& z);

/// alpha0 = Liouville, alpha1 = alpha0 + d(momentum angle).
FormPair torus_contact_pair(const FlatTorusBundle& bundle);

/// Random tangent vector to Sigma (projection off dH and dA).
PhaseVec torus_sigma_tangent(const SigmaSample& s, const PhaseVec& raw);

struct ResidualStats {
  double max = 0.0;
  double mean = 0.0;
  int count = 0;
  void add(double v);
};

struct ContactReport {
  std::string model;
  double k = 1.0;
  int samples = 0;
  double min_abs_det = 0.0;
  ResidualStats first_row;         // |a0(X0) - 2k| + |a0(X1) - 1|
  ResidualStats membership;        // |H - k| + |A - 1|
  ResidualStats dalpha_minus_omega;  // |d a1 - omega| on tangent pairs
  ResidualStats kernel;            // |d a1(X_i, eta)|, i = 0, 1
  ResidualStats pullback;          // a1 - a0 vs d(angle of the reduced covector)
  int first_betti = 0;             // of Sigma
};

ContactReport torus_contact_scan(double k, int samples, std::uint64_t seed, int n = 1,
                                 double fd_step = 1e-4);

// ---- SU(2) ----

/// Unit quaternions (w, x, y, z) with the round metric, S^1 acting on the
/// right by e^{zeta t}, zeta = i. Body momentum P = conj(q) v.
namespace su2 {
Vec multiply(const Vec& a, const Vec& b);
Vec conjugate(const Vec& a);
Eigen::Vector3d imaginary(const Vec& a);
Vec pure(const Eigen::Vector3d& v);
Eigen::Vector3d zeta();
}  // namespace su2

/// Samples on Sigma: q uniform on S^3, P = pbar + zeta with pbar uniform on
/// the circle of radius sqrt(2 kbar) orthogonal to zeta.
std::vector<SigmaSample> sample_su2_sigma(double kbar, int count, std::uint64_t seed);

/// alpha1(Q, dP) = <pi_P zeta, Q> + <ad_P^{-1} pi_P^perp zeta, dP> with Q and dP
/// in body coordinates; alpha0 = Liouville. Throws PreconditionError unless
/// kbar > 0; the form throws GeometryError at |P| < 1e-10.
FormPair su2_stable_pair(double kbar);

/// Random tangent vector to Sigma in the SU(2) model.
PhaseVec su2_sigma_tangent(const SigmaSample& s, const PhaseVec& raw);

struct Su2Report {
  double kbar = 0.5;
  int samples = 0;
  double min_abs_det = 0.0;
  ResidualStats det_error;      // |det - (2k - 1)|
  ResidualStats first_row;
  ResidualStats alpha1_X0;      // |a1(X0) - 1|
  ResidualStats alpha1_X1;      // |a1(X1) - 1|
  ResidualStats dalpha1_X0;     // |d a1(X0, eta)|
  ResidualStats membership;
  int first_betti = 1;
};

Su2Report su2_scan(double kbar, int samples, std::uint64_t seed, double fd_step = 1e-4);

}  // namespace maggeo
