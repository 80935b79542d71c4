#include "maggeo/geometry.hpp"

#include <cmath>

namespace maggeo {

namespace {

Mat cross_matrix(const Vec& n) {
  Mat m(3, 3);
  m << 0.0, -n(2), n(1),
       n(2), 0.0, -n(0),
       -n(1), n(0), 0.0;
  return m;
}

// Gamma^k_ij from the metric, its inverse and the coordinate derivatives dG[a].
Christoffel christoffel_from_derivatives(const Mat& ginv, const std::vector<Mat>& dg) {
  const int d = static_cast<int>(ginv.rows());
  Christoffel gamma(d, Mat::Zero(d, d));
  for (int k = 0; k < d; ++k) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int l = 0; l < d; ++l) {
          acc += ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
        }
        gamma[k](i, j) = 0.5 * acc;
      }
    }
  }
  return gamma;
}

}  // namespace

// ---------------------------------------------------------------- ManifoldModel

Christoffel ManifoldModel::christoffel_at(const Vec& q) const {
  const int d = ambient_dim();
  const double h = fd_step_;
  std::vector<Mat> dg(d);
  for (int a = 0; a < d; ++a) {
    Vec qp = q, qm = q;
    qp(a) += h;
    qm(a) -= h;
    dg[a] = (metric_at(qp) - metric_at(qm)) / (2.0 * h);
  }
  return christoffel_from_derivatives(metric_at(q).inverse(), dg);
}

Mat ManifoldModel::tangent_basis(const Vec& /*q*/) const {
  return Mat::Identity(ambient_dim(), ambient_dim());
}

Vec ManifoldModel::christoffel_contract(const Vec& q, const Vec& u, const Vec& v) const {
  const Christoffel gamma = christoffel_at(q);
  Vec out(ambient_dim());
  for (int k = 0; k < ambient_dim(); ++k) out(k) = u.dot(gamma[k] * v);
  return out;
}

// ---------------------------------------------------------------- FlatTorusBase

Mat FlatTorusBase::metric_at(const Vec& /*q*/) const { return Mat::Identity(2, 2); }

Mat FlatTorusBase::two_form_at(const Vec& /*q*/) const {
  const double s = field_strength();
  Mat m(2, 2);
  m << 0.0, s, -s, 0.0;
  return m;
}

Christoffel FlatTorusBase::christoffel_at(const Vec& /*q*/) const {
  return Christoffel(2, Mat::Zero(2, 2));
}

// ---------------------------------------------------------------- RoundSphereBase

Mat RoundSphereBase::metric_at(const Vec& /*q*/) const { return Mat::Identity(3, 3); }

Mat RoundSphereBase::two_form_at(const Vec& q) const {
  // u^T (-[n]x) v = <n, u x v>
  return -strength_ * cross_matrix(q.normalized());
}

Christoffel RoundSphereBase::christoffel_at(const Vec& q) const {
  Christoffel gamma(3);
  const double r2 = radius_ * radius_;
  for (int k = 0; k < 3; ++k) gamma[k] = Mat::Identity(3, 3) * (q(k) / r2);
  return gamma;
}

Mat RoundSphereBase::tangent_basis(const Vec& q) const {
  const Eigen::Vector3d n = Eigen::Vector3d(q(0), q(1), q(2)).normalized();
  Eigen::Vector3d a = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d b1 = (a - a.dot(n) * n).normalized();
  const Eigen::Vector3d b2 = n.cross(b1);
  Mat basis(3, 2);
  basis.col(0) = b1;
  basis.col(1) = b2;
  return basis;
}

Vec RoundSphereBase::project_point(const Vec& q) const { return radius_ * q.normalized(); }

Vec RoundSphereBase::project_vector(const Vec& q, const Vec& v) const {
  const Vec n = q.normalized();
  return v - v.dot(n) * n;
}

// ---------------------------------------------------------------- BundleModel

Mat BundleModel::retraction_jacobian(const Vec& /*q*/, const Vec& /*v*/) const {
  return Mat::Identity(ambient_dim(), ambient_dim());
}

Vec BundleModel::deck(const Vec& q, const Winding& /*w*/, int /*power*/) const { return q; }

Mat BundleModel::deck_linear(const Winding& /*w*/, int /*power*/) const {
  return Mat::Identity(ambient_dim(), ambient_dim());
}

Vec BundleModel::horizontal_lift(const Vec& q, const Vec& base_vector) const {
  const Mat hb = horizontal_basis(q);
  const Mat a = project_jacobian(q) * hb;
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(Eigen::VectorXd(base_vector));
  return hb * c;
}

double BundleModel::kinetic_energy(const Vec& q, const Vec& p) const {
  return 0.5 * p.dot(inverse_metric_at(q) * p);
}

double BundleModel::moment(const Vec& q, const Vec& p) const {
  return p.dot(fundamental_field_at(q));
}

// ---------------------------------------------------------------- FlatTorusBundle

Mat FlatTorusBundle::metric_at(const Vec& q) const {
  const double sx = field_strength() * q(0);
  Mat g(3, 3);
  g << 1.0, 0.0, 0.0,
       0.0, 1.0 + sx * sx, sx,
       0.0, sx, 1.0;
  return g;
}

Mat FlatTorusBundle::inverse_metric_at(const Vec& q) const {
  const double sx = field_strength() * q(0);
  Mat g(3, 3);
  g << 1.0, 0.0, 0.0,
       0.0, 1.0, -sx,
       0.0, -sx, 1.0 + sx * sx;
  return g;
}

Vec FlatTorusBundle::metric_quadratic_gradient(const Vec& q, const Vec& e) const {
  const double s = field_strength();
  Vec out = Vec::Zero(3);
  out(0) = 2.0 * s * s * q(0) * e(1) * e(1) + 2.0 * s * e(1) * e(2);
  return out;
}

Vec FlatTorusBundle::connection_at(const Vec& q) const {
  Vec th(3);
  th << 0.0, field_strength() * q(0), 1.0;
  return th;
}

Vec FlatTorusBundle::fundamental_field_at(const Vec& /*q*/) const { return Vec::Unit(3, 2); }

Mat FlatTorusBundle::fundamental_jacobian(const Vec& /*q*/) const { return Mat::Zero(3, 3); }

Christoffel FlatTorusBundle::christoffel_at(const Vec& q) const {
  const double s = field_strength();
  std::vector<Mat> dg(3, Mat::Zero(3, 3));
  dg[0](1, 1) = 2.0 * s * s * q(0);
  dg[0](1, 2) = s;
  dg[0](2, 1) = s;
  return christoffel_from_derivatives(inverse_metric_at(q), dg);
}

Vec FlatTorusBundle::nabla_fundamental(const Vec& q, const Vec& u) const {
  // Z = d/dz has constant components, so nabla_u Z = Gamma(u, Z).
  const Christoffel gamma = christoffel_at(q);
  Vec out(3);
  for (int k = 0; k < 3; ++k) out(k) = u.dot(gamma[k].col(2));
  return out;
}

Vec FlatTorusBundle::project(const Vec& q) const { return q.head(2); }

Mat FlatTorusBundle::project_jacobian(const Vec& /*q*/) const {
  Mat j = Mat::Zero(2, 3);
  j(0, 0) = 1.0;
  j(1, 1) = 1.0;
  return j;
}

Vec FlatTorusBundle::lift_point(const Vec& base_point) const {
  Vec q(3);
  q << base_point(0), base_point(1), 0.0;
  return q;
}

Mat FlatTorusBundle::horizontal_basis(const Vec& q) const {
  Mat b = Mat::Zero(3, 2);
  b(0, 0) = 1.0;
  b(1, 1) = 1.0;
  b(2, 1) = -field_strength() * q(0);
  return b;
}

Mat FlatTorusBundle::tangent_basis(const Vec& q) const {
  Mat b(3, 3);
  b.leftCols(2) = horizontal_basis(q);
  b.col(2) = Vec::Unit(3, 2);
  return b;
}

Vec FlatTorusBundle::rotate_fiber(const Vec& q, double angle) const {
  Vec out = q;
  out(2) += angle;
  return out;
}

double FlatTorusBundle::fiber_angle(const Vec& from, const Vec& to) const {
  return to(2) - from(2);
}

void FlatTorusBundle::geodesic_rhs(const Vec& q, const Vec& p, Vec& qdot, Vec& pdot) const {
  const double s = field_strength();
  qdot = inverse_metric_at(q) * p;
  pdot = Vec::Zero(3);
  pdot(0) = s * p(2) * (p(1) - s * q(0) * p(2));
}

Vec FlatTorusBundle::deck(const Vec& q, const Winding& w, int power) const {
  if (power == 0) return q;
  const double n = flux_quantum();
  const double wx = static_cast<double>(w[0]);
  const double wy = static_cast<double>(w[1]);
  const double wz = static_cast<double>(w[2]);
  Vec out(3);
  if (power == 1) {
    out << q(0) + kTwoPi * wx, q(1) + kTwoPi * wy, q(2) + kTwoPi * wz - n * wx * q(1);
  } else if (power == -1) {
    const double y = q(1) - kTwoPi * wy;
    out << q(0) - kTwoPi * wx, y, q(2) - kTwoPi * wz + n * wx * y;
  } else {
    throw GeometryError("deck transformation power must be -1, 0 or 1");
  }
  return out;
}

Mat FlatTorusBundle::deck_linear(const Winding& w, int power) const {
  Mat l = Mat::Identity(3, 3);
  l(2, 1) = -static_cast<double>(power) * flux_quantum() * static_cast<double>(w[0]);
  return l;
}

// ---------------------------------------------------------------- HopfSphereBundle

namespace {

Mat quaternion_k() {
  // K q = (-a2, b2, a1, -b1)
  Mat k = Mat::Zero(4, 4);
  k(0, 2) = -1.0;
  k(1, 3) = 1.0;
  k(2, 0) = 1.0;
  k(3, 1) = -1.0;
  return k;
}

Mat quaternion_l() {
  // L q = (-b2, -a2, b1, a1)
  Mat l = Mat::Zero(4, 4);
  l(0, 3) = -1.0;
  l(1, 2) = -1.0;
  l(2, 1) = 1.0;
  l(3, 0) = 1.0;
  return l;
}

}  // namespace

HopfSphereBundle::HopfSphereBundle() : base_(0.5, -2.0) {}

Mat HopfSphereBundle::complex_structure() {
  Mat j = Mat::Zero(4, 4);
  j(0, 1) = -1.0;
  j(1, 0) = 1.0;
  j(2, 3) = -1.0;
  j(3, 2) = 1.0;
  return j;
}

Mat HopfSphereBundle::metric_at(const Vec& /*q*/) const { return Mat::Identity(4, 4); }

Mat HopfSphereBundle::inverse_metric_at(const Vec& /*q*/) const { return Mat::Identity(4, 4); }

Vec HopfSphereBundle::metric_quadratic_gradient(const Vec& /*q*/, const Vec& /*e*/) const {
  return Vec::Zero(4);
}

Vec HopfSphereBundle::connection_at(const Vec& q) const { return complex_structure() * q; }

Vec HopfSphereBundle::fundamental_field_at(const Vec& q) const { return complex_structure() * q; }

Mat HopfSphereBundle::fundamental_jacobian(const Vec& /*q*/) const { return complex_structure(); }

Vec HopfSphereBundle::nabla_fundamental(const Vec& q, const Vec& u) const {
  return tangent_projection(q, complex_structure() * u);
}

Vec HopfSphereBundle::project(const Vec& q) const {
  const double a1 = q(0), b1 = q(1), a2 = q(2), b2 = q(3);
  Vec x(3);
  x << 0.5 * (a1 * a1 + b1 * b1 - a2 * a2 - b2 * b2), a1 * a2 + b1 * b2, b1 * a2 - a1 * b2;
  return x;
}

Mat HopfSphereBundle::project_jacobian(const Vec& q) const {
  const double a1 = q(0), b1 = q(1), a2 = q(2), b2 = q(3);
  Mat j(3, 4);
  j << a1, b1, -a2, -b2,
       a2, b2, a1, b1,
       -b2, a2, b1, -a1;
  return j;
}

Vec HopfSphereBundle::lift_point(const Vec& base_point) const {
  const Vec x = base_point.normalized();
  Vec q = Vec::Zero(4);
  if (1.0 + x(0) > 1e-12) {
    const double z1 = std::sqrt(0.5 * (1.0 + x(0)));
    q << z1, 0.0, x(1) / (2.0 * z1), -x(2) / (2.0 * z1);
  } else {
    q(2) = 1.0;
  }
  return q.normalized();
}

Mat HopfSphereBundle::horizontal_basis(const Vec& q) const {
  Mat b(4, 2);
  b.col(0) = quaternion_k() * q;
  b.col(1) = quaternion_l() * q;
  return b;
}

Mat HopfSphereBundle::tangent_basis(const Vec& q) const {
  Mat b(4, 3);
  b.leftCols(2) = horizontal_basis(q);
  b.col(2) = complex_structure() * q;
  return b;
}

Vec HopfSphereBundle::normalize(const Vec& q) const { return q.normalized(); }

Vec HopfSphereBundle::tangent_projection(const Vec& q, const Vec& v) const {
  return v - v.dot(q) * q;
}

Mat HopfSphereBundle::retraction_jacobian(const Vec& q, const Vec& v) const {
  const Vec y = q + v;
  const double ny = y.norm();
  const Vec r = y / ny;
  return (Mat::Identity(4, 4) - r * r.transpose()) / ny;
}

Vec HopfSphereBundle::rotate_fiber(const Vec& q, double angle) const {
  return std::cos(angle) * q + std::sin(angle) * (complex_structure() * q);
}

double HopfSphereBundle::fiber_angle(const Vec& from, const Vec& to) const {
  return std::atan2(to.dot(complex_structure() * from), to.dot(from));
}

void HopfSphereBundle::geodesic_rhs(const Vec& q, const Vec& p, Vec& qdot, Vec& pdot) const {
  qdot = p;
  pdot = -p.squaredNorm() * q;
}

void HopfSphereBundle::project_phase(Vec& q, Vec& p) const {
  q.normalize();
  p -= p.dot(q) * q;
}

// ---------------------------------------------------------------- catalog

std::shared_ptr<const BundleModel> make_bundle(const std::string& name, int n) {
  if (name == "torus") return std::make_shared<FlatTorusBundle>(n);
  if (name == "hopf") return std::make_shared<HopfSphereBundle>();
  throw PreconditionError("unknown model '" + name + "'");
}

// ---------------------------------------------------------------- operations

Vec lorentz_force(const ManifoldModel& model, const Vec& q, const Vec& v) {
  const Mat b = model.tangent_basis(q);
  const Mat g = model.metric_at(q);
  const Mat gram = b.transpose() * g * b;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      std::abs(gram.determinant()) < 1e-14) {
    throw GeometryError("singular metric in lorentz_force");
  }
  const Eigen::VectorXd rhs = b.transpose() * model.two_form_at(q) * v;
  const Eigen::VectorXd c = ldlt.solve(rhs);
  return b * c;
}

double connection_exterior_derivative(const BundleModel& bundle, const Vec& q, const Vec& u,
                                      const Vec& v, double step) {
  const double du_theta_v =
      (bundle.connection_at(q + step * u).dot(v) - bundle.connection_at(q - step * u).dot(v)) /
      (2.0 * step);
  const double dv_theta_u =
      (bundle.connection_at(q + step * v).dot(u) - bundle.connection_at(q - step * v).dot(u)) /
      (2.0 * step);
  return du_theta_v - dv_theta_u;
}

double dalpha_identity_residual(const BundleModel& bundle, const Vec& q, const Vec& u,
                                const Vec& v, double step) {
  const double lhs = connection_exterior_derivative(bundle, q, u, v, step);
  const double rhs = 2.0 * v.dot(bundle.metric_at(q) * bundle.nabla_fundamental(q, u));
  return std::abs(lhs - rhs);
}

ReducedState reduction_map(const BundleModel& bundle, const Vec& q, const Vec& p, double c,
                           double tol) {
  const double a = bundle.moment(q, p);
  if (std::abs(a - c) > tol) {
    throw PreconditionError("moment map mismatch: <p, Z> = " + std::to_string(a) +
                            ", expected " + std::to_string(c));
  }
  const ManifoldModel& base = bundle.base();
  ReducedState out;
  out.point = bundle.project(q);
  const Mat bb = base.tangent_basis(out.point);
  const Mat gbar = base.metric_at(out.point);
  Eigen::VectorXd pairing(bb.cols());
  for (int j = 0; j < bb.cols(); ++j) {
    pairing(j) = p.dot(bundle.horizontal_lift(q, bb.col(j)));
  }
  const Eigen::MatrixXd gram = bb.transpose() * gbar * bb;
  const Eigen::VectorXd coeff = gram.ldlt().solve(pairing);
  out.velocity = bb * coeff;
  out.covector = gbar * out.velocity;
  return out;
}

double base_kinetic_energy(const ManifoldModel& model, const ReducedState& s) {
  return 0.5 * s.velocity.dot(model.metric_at(s.point) * s.velocity);
}

}  // namespace maggeo
