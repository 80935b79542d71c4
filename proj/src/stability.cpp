#include "maggeo/stability.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace maggeo {

PhaseVec SigmaSample::z() const {
  PhaseVec out(q.size() + p.size());
  out << q, p;
  return out;
}

StabilityMatrix stability_matrix(const SigmaSample& s, const FormPair& forms) {
  const PhaseVec z = s.z();
  StabilityMatrix out;
  out.m << forms.alpha0(z, s.X0), forms.alpha0(z, s.X1), forms.alpha1(z, s.X0),
      forms.alpha1(z, s.X1);
  out.det = out.m(0, 0) * out.m(1, 1) - out.m(0, 1) * out.m(1, 0);
  return out;
}

double liouville(const PhaseVec& z, const PhaseVec& xi) {
  const int d = static_cast<int>(z.size()) / 2;
  return z.tail(d).dot(xi.head(d));
}

double canonical_two_form(const PhaseVec& xi, const PhaseVec& eta) {
  const int d = static_cast<int>(xi.size()) / 2;
  return xi.tail(d).dot(eta.head(d)) - eta.tail(d).dot(xi.head(d));
}

double exterior_derivative(const OneForm& alpha, const PhaseVec& z, const PhaseVec& xi,
                           const PhaseVec& eta, double step) {
  const double a = (alpha(z + step * xi, eta) - alpha(z - step * xi, eta)) / (2.0 * step);
  const double b = (alpha(z + step * eta, xi) - alpha(z - step * eta, xi)) / (2.0 * step);
  return a - b;
}

void ResidualStats::add(double v) {
  max = std::max(max, v);
  mean = (mean * count + v) / (count + 1);
  ++count;
}

namespace {

// Projection of raw onto the common kernel of the rows of c.
PhaseVec project_kernel(const Eigen::MatrixXd& c, const PhaseVec& raw) {
  const Eigen::MatrixXd gram = c * c.transpose();
  return raw - c.transpose() * gram.ldlt().solve(c * raw);
}

double wrap_angle(double a) { return std::remainder(a, kTwoPi); }

}  // namespace

// ---------------------------------------------------------------- flat torus

std::vector<SigmaSample> sample_torus_sigma(const FlatTorusBundle& bundle, double k, int count,
                                            std::uint64_t seed) {
  if (!(k > 0.5)) throw PreconditionError("k must exceed 1/2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s = bundle.field_strength();
  const double radius = std::sqrt(2.0 * k - 1.0);
  std::vector<SigmaSample> out;
  for (int i = 0; i < count; ++i) {
    SigmaSample smp;
    smp.q = Vec(3);
    smp.q << kTwoPi * unit(rng), kTwoPi * unit(rng), kTwoPi * unit(rng);
    const double ang = kTwoPi * unit(rng);
    smp.p = Vec(3);
    smp.p << radius * std::cos(ang), radius * std::sin(ang) + s * smp.q(0), 1.0;
    const double H = 0.5 * smp.p.dot(bundle.inverse_metric_at(smp.q) * smp.p);
    const double A = smp.p.dot(bundle.fundamental_field_at(smp.q));
    smp.H_residual = std::abs(H - k);
    smp.A_residual = std::abs(A - 1.0);
    Vec qdot, pdot;
    bundle.geodesic_rhs(smp.q, smp.p, qdot, pdot);
    smp.X0 = PhaseVec(6);
    smp.X0 << qdot, pdot;
    smp.X1 = PhaseVec(6);
    smp.X1 << bundle.fundamental_field_at(smp.q),
        -bundle.fundamental_jacobian(smp.q).transpose() * smp.p;
    out.push_back(std::move(smp));
  }
  return out;
}

double torus_momentum_angle(const FlatTorusBundle& bundle, const PhaseVec& z) {
  const double s = bundle.field_strength();
  return std::atan2(z(4) - s * z(0) * z(5), z(3));
}

FormPair torus_contact_pair(const FlatTorusBundle& bundle) {
  const double s = bundle.field_strength();
  FormPair f;
  f.tag = "liouville-plus-pullback";
  f.alpha0 = liouville;
  f.alpha1 = [s](const PhaseVec& z, const PhaseVec& xi) {
    const double u = z(4) - s * z(0) * z(5);
    const double v = z(3);
    const double du = xi(4) - s * xi(0) * z(5) - s * z(0) * xi(5);
    const double dv = xi(3);
    return liouville(z, xi) + (v * du - u * dv) / (u * u + v * v);
  };
  return f;
}

PhaseVec torus_sigma_tangent(const SigmaSample& s, const PhaseVec& raw) {
  Eigen::MatrixXd c(2, 6);
  // dH = (-pdot, qdot) and dA = (J_Z^T p, Z): the Hamiltonian fields rotated
  c.row(0) << -s.X0.tail(3).transpose(), s.X0.head(3).transpose();
  c.row(1) << -s.X1.tail(3).transpose(), s.X1.head(3).transpose();
  return project_kernel(c, raw);
}

ContactReport torus_contact_scan(double k, int samples, std::uint64_t seed, int n,
                                 double fd_step) {
  const FlatTorusBundle bundle(n);
  const FormPair forms = torus_contact_pair(bundle);
  ContactReport rep;
  rep.model = bundle.name();
  rep.k = k;
  rep.samples = samples;
  rep.first_betti = 3;  // Sigma = E x S^1, b1(E) = 2 for the nilmanifold
  rep.min_abs_det = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  const auto gaussian = [&] {
    PhaseVec v(6);
    for (int i = 0; i < 6; ++i) v(i) = normal(rng);
    return v;
  };
  const auto reduced_angle = [&](const PhaseVec& z) {
    const ReducedState r = reduction_map(bundle, z.head(3), z.tail(3), z.tail(3).dot(
                                             bundle.fundamental_field_at(z.head(3))));
    return std::atan2(r.covector(1), r.covector(0));
  };
  for (const SigmaSample& s : sample_torus_sigma(bundle, k, samples, seed)) {
    const StabilityMatrix m = stability_matrix(s, forms);
    rep.min_abs_det = std::min(rep.min_abs_det, std::abs(m.det));
    rep.first_row.add(std::abs(m.m(0, 0) - 2.0 * k) + std::abs(m.m(0, 1) - 1.0));
    rep.membership.add(s.H_residual + s.A_residual);

    const PhaseVec z = s.z();
    const PhaseVec xi = torus_sigma_tangent(s, gaussian());
    const PhaseVec eta = torus_sigma_tangent(s, gaussian());
    rep.dalpha_minus_omega.add(std::abs(exterior_derivative(forms.alpha1, z, xi, eta, fd_step) -
                                        canonical_two_form(xi, eta)));
    rep.kernel.add(std::abs(exterior_derivative(forms.alpha1, z, s.X0, eta, fd_step)));
    rep.kernel.add(std::abs(exterior_derivative(forms.alpha1, z, s.X1, eta, fd_step)));

    const double dang = wrap_angle(reduced_angle(z + fd_step * xi) -
                                   reduced_angle(z - fd_step * xi)) / (2.0 * fd_step);
    rep.pullback.add(std::abs(forms.alpha1(z, xi) - forms.alpha0(z, xi) - dang));
    rep.pullback.add(std::abs(wrap_angle(reduced_angle(z) - torus_momentum_angle(bundle, z))));
  }
  return rep;
}

// ---------------------------------------------------------------- SU(2)

namespace su2 {

Vec multiply(const Vec& a, const Vec& b) {
  Vec c(4);
  c << a(0) * b(0) - a(1) * b(1) - a(2) * b(2) - a(3) * b(3),
      a(0) * b(1) + a(1) * b(0) + a(2) * b(3) - a(3) * b(2),
      a(0) * b(2) - a(1) * b(3) + a(2) * b(0) + a(3) * b(1),
      a(0) * b(3) + a(1) * b(2) - a(2) * b(1) + a(3) * b(0);
  return c;
}

Vec conjugate(const Vec& a) {
  Vec c = -a;
  c(0) = a(0);
  return c;
}

Eigen::Vector3d imaginary(const Vec& a) { return a.tail(3); }

Vec pure(const Eigen::Vector3d& v) {
  Vec c(4);
  c << 0.0, v;
  return c;
}

Eigen::Vector3d zeta() { return Eigen::Vector3d::UnitX(); }

}  // namespace su2

namespace {

SigmaSample su2_sample_at(const Vec& q, const Eigen::Vector3d& P, double k) {
  SigmaSample s;
  s.q = q;
  s.p = su2::multiply(q, su2::pure(P));
  const Vec zq = su2::multiply(q, su2::pure(su2::zeta()));
  s.H_residual = std::abs(0.5 * s.p.squaredNorm() - k);
  s.A_residual = std::abs(s.p.dot(zq) - 1.0);
  s.X0 = PhaseVec(8);
  s.X0 << s.p, -s.p.squaredNorm() * q;
  s.X1 = PhaseVec(8);
  s.X1 << zq, su2::multiply(s.p, su2::pure(su2::zeta()));
  return s;
}

}  // namespace

std::vector<SigmaSample> sample_su2_sigma(double kbar, int count, std::uint64_t seed) {
  if (!(kbar > 0.0)) throw PreconditionError("k must exceed 1/2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = std::sqrt(2.0 * kbar);
  std::vector<SigmaSample> out;
  for (int i = 0; i < count; ++i) {
    Vec q(4);
    for (int j = 0; j < 4; ++j) q(j) = normal(rng);
    q.normalize();
    const double ang = kTwoPi * unit(rng);
    const Eigen::Vector3d P(1.0, radius * std::cos(ang), radius * std::sin(ang));
    out.push_back(su2_sample_at(q, P, kbar + 0.5));
  }
  return out;
}

FormPair su2_stable_pair(double kbar) {
  if (!(kbar > 0.0)) throw PreconditionError("k must exceed 1/2");
  FormPair f;
  f.tag = "su2-stable-pair";
  f.alpha0 = liouville;
  f.alpha1 = [](const PhaseVec& z, const PhaseVec& xi) {
    const Vec q = z.head(4), v = z.tail(4);
    const Vec dq = xi.head(4), dv = xi.tail(4);
    const Eigen::Vector3d P = su2::imaginary(su2::multiply(su2::conjugate(q), v));
    const double p2 = P.squaredNorm();
    if (p2 < 1e-20) throw GeometryError("regularity failure: body momentum vanishes");
    const Eigen::Vector3d Q = su2::imaginary(su2::multiply(su2::conjugate(q), dq));
    const Eigen::Vector3d dP = su2::imaginary(su2::multiply(su2::conjugate(dq), v) +
                                              su2::multiply(su2::conjugate(q), dv));
    const Eigen::Vector3d zeta = su2::zeta();
    const Eigen::Vector3d along = (zeta.dot(P) / p2) * P;
    // ad_P x = [x, P] = 2 x cross P in quaternion brackets; invert on P^perp
    const Eigen::Vector3d x = P.cross(zeta - along) / (2.0 * p2);
    return along.dot(Q) + x.dot(dP);
  };
  return f;
}

PhaseVec su2_sigma_tangent(const SigmaSample& s, const PhaseVec& raw) {
  const Vec& q = s.q;
  const Vec& v = s.p;
  const Vec zq = su2::multiply(q, su2::pure(su2::zeta()));
  const Vec zv = su2::multiply(v, su2::pure(su2::zeta()));
  Eigen::MatrixXd c(4, 8);
  c.row(0) << q.transpose(), Vec::Zero(4).transpose();
  c.row(1) << v.transpose(), q.transpose();
  c.row(2) << Vec::Zero(4).transpose(), v.transpose();
  c.row(3) << -zv.transpose(), zq.transpose();
  return project_kernel(c, raw);
}

Su2Report su2_scan(double kbar, int samples, std::uint64_t seed, double fd_step) {
  const FormPair forms = su2_stable_pair(kbar);
  const double k = kbar + 0.5;
  Su2Report rep;
  rep.kbar = kbar;
  rep.samples = samples;
  rep.min_abs_det = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  for (const SigmaSample& s : sample_su2_sigma(kbar, samples, seed)) {
    const StabilityMatrix m = stability_matrix(s, forms);
    rep.min_abs_det = std::min(rep.min_abs_det, std::abs(m.det));
    rep.det_error.add(std::abs(m.det - (2.0 * k - 1.0)));
    rep.first_row.add(std::abs(m.m(0, 0) - 2.0 * k) + std::abs(m.m(0, 1) - 1.0));
    rep.alpha1_X0.add(std::abs(m.m(1, 0) - 1.0));
    rep.alpha1_X1.add(std::abs(m.m(1, 1) - 1.0));
    rep.membership.add(s.H_residual + s.A_residual);
    PhaseVec raw(8);
    for (int i = 0; i < 8; ++i) raw(i) = normal(rng);
    const PhaseVec eta = su2_sigma_tangent(s, raw);
    rep.dalpha1_X0.add(std::abs(exterior_derivative(forms.alpha1, s.z(), s.X0, eta, fd_step)));
  }
  return rep;
}

}  // namespace maggeo
