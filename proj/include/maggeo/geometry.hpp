#pragma once

// Base-manifold and circle-bundle geometry for the built-in model spaces.
//
// Coordinates are either a global periodic chart (flat torus, nilmanifold)
// or an ambient Euclidean embedding with constraint projection (spheres).
// Models are immutable after construction and safe to share between threads.

#include "maggeo/common.hpp"

#include <memory>
#include <string>
#include <vector>

namespace maggeo {

/// Christoffel symbols as Gamma[k](i, j).
using Christoffel = std::vector<Mat>;

/// A Riemannian manifold (M, g) carrying a closed 2-form sigma.
class ManifoldModel {
 public:
  virtual ~ManifoldModel() = default;

  virtual std::string name() const = 0;
  /// Intrinsic dimension.
  virtual int dim() const = 0;
  /// Number of chart or ambient coordinates.
  virtual int ambient_dim() const = 0;

  virtual Mat metric_at(const Vec& q) const = 0;
  /// sigma_q(u, v) = u^T S v for tangent u, v.
  virtual Mat two_form_at(const Vec& q) const = 0;
  /// Default: central differences of the metric with step fd_step().
  virtual Christoffel christoffel_at(const Vec& q) const;

  /// Columns span T_q M.
  virtual Mat tangent_basis(const Vec& q) const;
  virtual Vec project_point(const Vec& q) const { return q; }
  virtual Vec project_vector(const Vec& /*q*/, const Vec& v) const { return v; }

  /// Gamma(u, v)^k = Gamma^k_ij u^i v^j.
  Vec christoffel_contract(const Vec& q, const Vec& u, const Vec& v) const;

  double fd_step() const { return fd_step_; }
  void set_fd_step(double h) { fd_step_ = h; }

 private:
  double fd_step_ = 1e-5;
};

/// Flat torus R^2/(2 pi Z)^2 with sigma = (n / 2 pi) dx ^ dy.
class FlatTorusBase final : public ManifoldModel {
 public:
  explicit FlatTorusBase(int n) : n_(n) {}

  std::string name() const override { return "torus"; }
  int dim() const override { return 2; }
  int ambient_dim() const override { return 2; }
  Mat metric_at(const Vec& q) const override;
  Mat two_form_at(const Vec& q) const override;
  Christoffel christoffel_at(const Vec& q) const override;

  int flux_quantum() const { return n_; }
  double field_strength() const { return n_ / kTwoPi; }

 private:
  int n_;
};

/// Round sphere of the given radius in R^3 with sigma = strength * dA.
class RoundSphereBase final : public ManifoldModel {
 public:
  RoundSphereBase(double radius, double strength) : radius_(radius), strength_(strength) {}

  std::string name() const override { return "sphere"; }
  int dim() const override { return 2; }
  int ambient_dim() const override { return 3; }
  Mat metric_at(const Vec& q) const override;
  Mat two_form_at(const Vec& q) const override;
  /// Ambient projection formula: Gamma^k_ij = delta_ij x^k / R^2.
  Christoffel christoffel_at(const Vec& q) const override;
  Mat tangent_basis(const Vec& q) const override;
  Vec project_point(const Vec& q) const override;
  Vec project_vector(const Vec& q, const Vec& v) const override;

  double radius() const { return radius_; }
  double strength() const { return strength_; }

 private:
  double radius_;
  double strength_;
};

/// Principal S^1-bundle tau: E -> M with connection form theta (theta(Z) = 1,
/// d theta = tau^* sigma) and lifted metric g^theta = tau^* g + theta (x) theta.
class BundleModel {
 public:
  virtual ~BundleModel() = default;

  virtual std::string name() const = 0;
  virtual const ManifoldModel& base() const = 0;
  int dim() const { return base().dim() + 1; }
  virtual int ambient_dim() const = 0;

  virtual Mat metric_at(const Vec& q) const = 0;
  virtual Mat inverse_metric_at(const Vec& q) const = 0;
  /// Gradient of q -> e^T G(q) e for fixed e.
  virtual Vec metric_quadratic_gradient(const Vec& q, const Vec& e) const = 0;

  virtual Vec connection_at(const Vec& q) const = 0;
  virtual Vec fundamental_field_at(const Vec& q) const = 0;
  /// dZ/dq.
  virtual Mat fundamental_jacobian(const Vec& q) const = 0;
  /// Levi-Civita derivative of Z along u.
  virtual Vec nabla_fundamental(const Vec& q, const Vec& u) const = 0;

  virtual Vec project(const Vec& q) const = 0;
  virtual Mat project_jacobian(const Vec& q) const = 0;
  /// Some point in the fiber over a base point.
  virtual Vec lift_point(const Vec& base_point) const = 0;
  /// Columns span ker theta.
  virtual Mat horizontal_basis(const Vec& q) const = 0;
  /// Columns span T_q E, orthonormal for g^theta where the model allows it.
  virtual Mat tangent_basis(const Vec& q) const = 0;

  virtual Vec normalize(const Vec& q) const { return q; }
  virtual Vec tangent_projection(const Vec& /*q*/, const Vec& v) const { return v; }
  /// Derivative of y -> normalize(y) at y = q + v.
  virtual Mat retraction_jacobian(const Vec& q, const Vec& v) const;

  /// e^{i angle} q.
  virtual Vec rotate_fiber(const Vec& q, double angle) const = 0;
  /// The angle a with e^{i a} from = to (to must lie in the fiber of from).
  virtual double fiber_angle(const Vec& from, const Vec& to) const = 0;

  /// Cotangent geodesic vector field of H = |p|^2 / 2.
  virtual void geodesic_rhs(const Vec& q, const Vec& p, Vec& qdot, Vec& pdot) const = 0;
  /// Restore phase-space constraints after a numerical step.
  virtual void project_phase(Vec& /*q*/, Vec& /*p*/) const {}

  /// Deck transformation D^power for the given winding, and its linear part.
  virtual Vec deck(const Vec& q, const Winding& w, int power) const;
  virtual Mat deck_linear(const Winding& w, int power) const;

  Vec horizontal_lift(const Vec& q, const Vec& base_vector) const;
  double kinetic_energy(const Vec& q, const Vec& p) const;
  double moment(const Vec& q, const Vec& p) const;

  double fd_step() const { return fd_step_; }
  void set_fd_step(double h) { fd_step_ = h; }

 private:
  double fd_step_ = 1e-5;
};

/// Nilmanifold over FlatTorusBase(n): coordinates (x, y, z), fiber z in R/2 pi Z,
/// theta = dz + s x dy with s = n / 2 pi, gauge shift z -> z - n y across the x-seam.
class FlatTorusBundle final : public BundleModel {
 public:
  explicit FlatTorusBundle(int n) : base_(n) {}

  std::string name() const override { return "torus"; }
  const ManifoldModel& base() const override { return base_; }
  int ambient_dim() const override { return 3; }

  Mat metric_at(const Vec& q) const override;
  Mat inverse_metric_at(const Vec& q) const override;
  Vec metric_quadratic_gradient(const Vec& q, const Vec& e) const override;
  Vec connection_at(const Vec& q) const override;
  Vec fundamental_field_at(const Vec& q) const override;
  Mat fundamental_jacobian(const Vec& q) const override;
  Vec nabla_fundamental(const Vec& q, const Vec& u) const override;
  Vec project(const Vec& q) const override;
  Mat project_jacobian(const Vec& q) const override;
  Vec lift_point(const Vec& base_point) const override;
  Mat horizontal_basis(const Vec& q) const override;
  Mat tangent_basis(const Vec& q) const override;
  Vec rotate_fiber(const Vec& q, double angle) const override;
  double fiber_angle(const Vec& from, const Vec& to) const override;
  void geodesic_rhs(const Vec& q, const Vec& p, Vec& qdot, Vec& pdot) const override;
  Vec deck(const Vec& q, const Winding& w, int power) const override;
  Mat deck_linear(const Winding& w, int power) const override;

  /// Analytic Christoffel symbols of g^theta.
  Christoffel christoffel_at(const Vec& q) const;

  int flux_quantum() const { return base_.flux_quantum(); }
  double field_strength() const { return base_.field_strength(); }

 private:
  FlatTorusBase base_;
};

/// Hopf fibration S^3 -> S^2(1/2) in ambient R^4 = C^2, Z(q) = i q,
/// theta_q(v) = <i q, v>, round metric upstairs.
class HopfSphereBundle final : public BundleModel {
 public:
  HopfSphereBundle();

  std::string name() const override { return "hopf"; }
  const ManifoldModel& base() const override { return base_; }
  int ambient_dim() const override { return 4; }

  Mat metric_at(const Vec& q) const override;
  Mat inverse_metric_at(const Vec& q) const override;
  Vec metric_quadratic_gradient(const Vec& q, const Vec& e) const override;
  Vec connection_at(const Vec& q) const override;
  Vec fundamental_field_at(const Vec& q) const override;
  Mat fundamental_jacobian(const Vec& q) const override;
  Vec nabla_fundamental(const Vec& q, const Vec& u) const override;
  Vec project(const Vec& q) const override;
  Mat project_jacobian(const Vec& q) const override;
  Vec lift_point(const Vec& base_point) const override;
  Mat horizontal_basis(const Vec& q) const override;
  Mat tangent_basis(const Vec& q) const override;
  Vec normalize(const Vec& q) const override;
  Vec tangent_projection(const Vec& q, const Vec& v) const override;
  Mat retraction_jacobian(const Vec& q, const Vec& v) const override;
  Vec rotate_fiber(const Vec& q, double angle) const override;
  double fiber_angle(const Vec& from, const Vec& to) const override;
  void geodesic_rhs(const Vec& q, const Vec& p, Vec& qdot, Vec& pdot) const override;
  void project_phase(Vec& q, Vec& p) const override;

  /// Multiplication by i on C^2 in real coordinates (a1, b1, a2, b2).
  static Mat complex_structure();

 private:
  RoundSphereBase base_;
};

// Model catalog.
std::shared_ptr<const BundleModel> make_bundle(const std::string& name, int n = 1);

// ---- operations ----

/// Y_q(v) with g_q(u, Y_q v) = sigma_q(u, v) for all tangent u.
Vec lorentz_force(const ManifoldModel& model, const Vec& q, const Vec& v);

/// |d theta(u, v) - 2 g^theta(nabla_u Z, v)|, d theta by central differences.
double dalpha_identity_residual(const BundleModel& bundle, const Vec& q, const Vec& u,
                                const Vec& v, double step = 1e-4);

/// Central-difference exterior derivative of the connection form.
double connection_exterior_derivative(const BundleModel& bundle, const Vec& q, const Vec& u,
                                      const Vec& v, double step);

struct ReducedState {
  Vec point;     // base point tau(q)
  Vec covector;  // base covector, chart components
  Vec velocity;  // metric dual of covector
};

/// Pi_c(q, p): <Pi_c(q,p), d tau v> = <p, v> - c theta(v).
/// Throws PreconditionError when |<p, Z> - c| > tol.
ReducedState reduction_map(const BundleModel& bundle, const Vec& q, const Vec& p, double c,
                           double tol = 1e-8);

/// Base kinetic energy |pbar|^2 / 2 of a reduced state.
double base_kinetic_energy(const ManifoldModel& model, const ReducedState& s);

}  // namespace maggeo
