#include "maggeo/dynamics.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace maggeo {

namespace {

int step_count(double duration, double step) {
  if (!(step > 0.0)) throw PreconditionError("integration step must be positive");
  if (!(duration >= 0.0)) throw PreconditionError("integration duration must be non-negative");
  return std::max(1, static_cast<int>(std::ceil(duration / step - 1e-9)));
}

void check_finite(const Vec& q, const Vec& v) {
  if (!q.allFinite() || !v.allFinite()) throw GeometryError("integration left the chart domain");
}

// One classical RK4 step of (q, w)' = f(q, w).
template <class F>
void rk4(const F& f, Vec& q, Vec& w, double h) {
  Vec k1q, k1w, k2q, k2w, k3q, k3w, k4q, k4w;
  f(q, w, k1q, k1w);
  f(q + 0.5 * h * k1q, w + 0.5 * h * k1w, k2q, k2w);
  f(q + 0.5 * h * k2q, w + 0.5 * h * k2w, k3q, k3w);
  f(q + h * k3q, w + h * k3w, k4q, k4w);
  q += (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  w += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
}

struct MagneticRhs {
  const ManifoldModel& model;
  void operator()(const Vec& q, const Vec& v, Vec& qdot, Vec& vdot) const {
    qdot = v;
    vdot = lorentz_force(model, q, v) - model.christoffel_contract(q, v, v);
  }
};

struct GeodesicRhs {
  const BundleModel& bundle;
  void operator()(const Vec& q, const Vec& p, Vec& qdot, Vec& pdot) const {
    bundle.geodesic_rhs(q, p, qdot, pdot);
  }
};

void magnetic_step(const ManifoldModel& model, Vec& q, Vec& v, double h) {
  rk4(MagneticRhs{model}, q, v, h);
  q = model.project_point(q);
  v = model.project_vector(q, v);
  check_finite(q, v);
}

void geodesic_step(const BundleModel& bundle, Vec& q, Vec& p, double h) {
  rk4(GeodesicRhs{bundle}, q, p, h);
  bundle.project_phase(q, p);
  check_finite(q, p);
}

double kinetic(const ManifoldModel& model, const Vec& q, const Vec& v) {
  return 0.5 * v.dot(model.metric_at(q) * v);
}

// Fourth-order central difference at index i with wrap-around when periodic.
Vec central_derivative(const std::vector<Vec>& y, std::size_t i, double dt, bool periodic) {
  const long n = static_cast<long>(y.size());
  auto at = [&](long j) -> const Vec& {
    if (periodic) j = ((j % n) + n) % n;
    return y[static_cast<std::size_t>(j)];
  };
  const long ii = static_cast<long>(i);
  return (at(ii - 2) - 8.0 * at(ii - 1) + 8.0 * at(ii + 1) - at(ii + 2)) / (12.0 * dt);
}

}  // namespace

double Trajectory::drift(const std::string& name) const {
  const auto it = std::find(invariant_names.begin(), invariant_names.end(), name);
  if (it == invariant_names.end()) throw PreconditionError("unknown invariant '" + name + "'");
  const std::size_t c = static_cast<std::size_t>(it - invariant_names.begin());
  double worst = 0.0;
  for (const auto& row : invariants) worst = std::max(worst, std::abs(row[c] - invariants[0][c]));
  return worst;
}

Trajectory integrate_magnetic(const ManifoldModel& model, const Vec& q0, const Vec& v0,
                              double duration, double step, int record_every) {
  const int n = step_count(duration, step);
  const double h = duration / n;
  Trajectory traj;
  traj.invariant_names = {"energy"};
  Vec q = model.project_point(q0);
  Vec v = model.project_vector(q, v0);
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back({q, v, Representation::Tangent});
    traj.invariants.push_back({kinetic(model, q, v)});
  };
  record(0.0);
  for (int i = 1; i <= n; ++i) {
    magnetic_step(model, q, v, h);
    if (i % record_every == 0 || i == n) record(i * h);
  }
  return traj;
}

PhaseState magnetic_flow_map(const ManifoldModel& model, const Vec& q0, const Vec& v0,
                             double duration, int steps) {
  if (steps <= 0) throw PreconditionError("step count must be positive");
  const double h = duration / steps;
  Vec q = q0, v = v0;
  for (int i = 0; i < steps; ++i) magnetic_step(model, q, v, h);
  return {q, v, Representation::Tangent};
}

Trajectory integrate_lifted_geodesic(const BundleModel& bundle, const PhaseState& s0,
                                     double duration, double step, int record_every) {
  if (s0.rep != Representation::Cotangent) {
    throw PreconditionError("lifted geodesic flow expects a cotangent state");
  }
  const int n = step_count(duration, step);
  const double h = duration / n;
  Trajectory traj;
  traj.invariant_names = {"H", "A"};
  Vec q = s0.position, p = s0.vector;
  bundle.project_phase(q, p);
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back({q, p, Representation::Cotangent});
    traj.invariants.push_back({bundle.kinetic_energy(q, p), bundle.moment(q, p)});
  };
  record(0.0);
  for (int i = 1; i <= n; ++i) {
    geodesic_step(bundle, q, p, h);
    if (i % record_every == 0 || i == n) record(i * h);
  }
  return traj;
}

ReductionComparison compare_reduction(const BundleModel& bundle, const PhaseState& s0,
                                      double duration, double step, double tol) {
  const double a = bundle.moment(s0.position, s0.vector);
  if (std::abs(a - 1.0) > tol) {
    throw PreconditionError("compare_reduction needs A = 1, got " + std::to_string(a));
  }
  const Trajectory up = integrate_lifted_geodesic(bundle, s0, duration, step);
  const ReducedState r0 = reduction_map(bundle, up.states[0].position, up.states[0].vector, 1.0,
                                        std::max(tol, 1e-6));
  const Trajectory down = integrate_magnetic(bundle.base(), r0.point, r0.velocity, duration, step);

  ReductionComparison out;
  out.reduced_energy = bundle.kinetic_energy(s0.position, s0.vector) - 0.5;
  for (std::size_t i = 0; i < up.size(); ++i) {
    // reduce at the sample's own moment level; A drifts at integrator order
    const Vec& q = up.states[i].position;
    const Vec& p = up.states[i].vector;
    const ReducedState r = reduction_map(bundle, q, p, bundle.moment(q, p));
    const double dx = (r.point - down.states[i].position).norm();
    const double dv = (r.velocity - down.states[i].vector).norm();
    out.sup_distance = std::max({out.sup_distance, dx, dv});
  }
  return out;
}

double magnetic_ode_residual(const ManifoldModel& model, const std::vector<Vec>& x,
                             const std::vector<Vec>& v, double dt) {
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < v.size(); ++i) {
    const Vec acc = central_derivative(v, i, dt, false) + model.christoffel_contract(x[i], v[i], v[i]);
    const Vec r = model.project_vector(x[i], acc) - lorentz_force(model, x[i], v[i]);
    worst = std::max(worst, r.norm());
  }
  return worst;
}

CurvatureStats measure_geodesic_curvature(const ManifoldModel& model, const std::vector<Vec>& x,
                                          const std::vector<Vec>& v, double dt, bool periodic) {
  CurvatureStats st;
  st.min = std::numeric_limits<double>::infinity();
  st.max = 0.0;
  std::size_t count = 0;
  const std::size_t lo = periodic ? 0 : 2;
  const std::size_t hi = periodic ? v.size() : (v.size() >= 2 ? v.size() - 2 : 0);
  for (std::size_t i = lo; i < hi; ++i) {
    const Vec acc = model.project_vector(
        x[i], central_derivative(v, i, dt, periodic) + model.christoffel_contract(x[i], v[i], v[i]));
    const Mat g = model.metric_at(x[i]);
    const double speed2 = v[i].dot(g * v[i]);
    const double kappa = std::sqrt(acc.dot(g * acc)) / speed2;
    st.mean += kappa;
    st.min = std::min(st.min, kappa);
    st.max = std::max(st.max, kappa);
    ++count;
  }
  if (count == 0) throw PreconditionError("too few samples to measure curvature");
  st.mean /= static_cast<double>(count);
  return st;
}

ShootResult shoot_closed_orbit(const ManifoldModel& model, double kbar, const Vec& q0,
                               const Vec& v0, double period, const ShootConfig& cfg) {
  if (!(kbar > 0.0)) throw PreconditionError("kbar must be positive");
  if (!(period > 0.0)) throw PreconditionError("initial period must be positive");
  const double speed = std::sqrt(2.0 * kbar);
  const Vec base = model.project_point(q0);
  const Mat basis = model.tangent_basis(base);
  const Mat g0 = model.metric_at(base);
  const Vec b1 = basis.col(0) / std::sqrt(basis.col(0).dot(g0 * basis.col(0)));
  Vec b2 = basis.col(1) - basis.col(1).dot(g0 * b1) * b1;
  b2 /= std::sqrt(b2.dot(g0 * b2));

  auto unpack = [&](const Eigen::Vector4d& u, Vec& q, Vec& v) {
    q = model.project_point(base + u(0) * b1 + u(1) * b2);
    Vec w = model.project_vector(q, std::cos(u(2)) * b1 + std::sin(u(2)) * b2);
    v = speed * w / std::sqrt(w.dot(model.metric_at(q) * w));
  };
  auto residual = [&](const Eigen::Vector4d& u) {
    Vec q, v;
    unpack(u, q, v);
    const PhaseState end = magnetic_flow_map(model, q, v, u(3), cfg.steps);
    const int d = model.ambient_dim();
    Eigen::VectorXd r(2 * d);
    r.head(d) = end.position - q;
    r.tail(d) = end.vector - v;
    return r;
  };

  const Vec vproj = model.project_vector(base, v0);
  Eigen::Vector4d u(0.0, 0.0, std::atan2(vproj.dot(g0 * b2), vproj.dot(g0 * b1)), period);

  ShootResult out;
  Eigen::VectorXd r = residual(u);
  for (int it = 0; it <= cfg.max_iterations; ++it) {
    out.iterations = it;
    out.residual = r.lpNorm<Eigen::Infinity>();
    if (out.residual < cfg.tol) {
      out.converged = true;
      break;
    }
    if (it == cfg.max_iterations) {
      out.message = "no convergence within iteration budget";
      break;
    }
    Eigen::MatrixXd jac(r.size(), 4);
    for (int j = 0; j < 4; ++j) {
      const double h = cfg.fd_step * std::max(1.0, std::abs(u(j)));
      Eigen::Vector4d up = u, um = u;
      up(j) += h;
      um(j) -= h;
      jac.col(j) = (residual(up) - residual(um)) / (2.0 * h);
    }
    const Eigen::Vector4d du = -jac.completeOrthogonalDecomposition().solve(r);
    double t = 1.0;
    bool improved = false;
    Eigen::VectorXd rn;
    while (t > 1e-4) {
      rn = residual(u + t * du);
      if (rn.norm() < r.norm()) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      out.message = "Gauss-Newton stalled";
      break;
    }
    u += t * du;
    r = rn;
    if (u(3) < cfg.min_period_fraction * period) {
      out.message = "period collapsed; no closed orbit near the guess";
      break;
    }
  }
  unpack(u, out.q, out.v);
  out.period = u(3);
  if (out.converged && u(3) < cfg.min_period_fraction * period) {
    out.converged = false;
    out.message = "period collapsed; no closed orbit near the guess";
  }
  return out;
}

LiftedOrbit lift_orbit(const BundleModel& bundle, const Vec& q0, const Vec& v0, double period,
                       int n, double step) {
  if (n < 8) throw PreconditionError("lift_orbit needs at least 8 samples");
  LiftedOrbit out;
  out.period = period;
  out.q0 = bundle.lift_point(q0);
  const Vec h = bundle.horizontal_lift(out.q0, v0);
  out.p0 = bundle.metric_at(out.q0) * h + bundle.connection_at(out.q0);
  out.k = bundle.kinetic_energy(out.q0, out.p0);

  const int sub = step_count(period / n, step);
  const double dt = period / (static_cast<double>(n) * sub);
  std::vector<Vec> xs;
  Vec q = out.q0, p = out.p0;
  xs.push_back(q);
  for (int i = 1; i <= n; ++i) {
    for (int j = 0; j < sub; ++j) geodesic_step(bundle, q, p, dt);
    xs.push_back(q);
  }
  out.phi = bundle.fiber_angle(xs.front(), xs.back());
  out.samples.resize(bundle.ambient_dim(), n);
  for (int i = 0; i < n; ++i) {
    out.samples.col(i) = bundle.rotate_fiber(xs[static_cast<std::size_t>(i)],
                                             -out.phi * static_cast<double>(i) / n);
  }
  return out;
}

double rescaling_residual(const BundleModel& bundle, const PhaseState& s0, double period,
                          double phi, int samples, double step) {
  if (samples < 8) throw PreconditionError("rescaling_residual needs at least 8 samples");
  const int sub = step_count(period / samples, step);
  const double dt = period / (static_cast<double>(samples) * sub);
  std::vector<Vec> ys, xs, ps;
  Vec q = s0.position, p = s0.vector;
  bundle.project_phase(q, p);
  for (int i = 0; i <= samples; ++i) {
    if (i > 0) {
      for (int j = 0; j < sub; ++j) geodesic_step(bundle, q, p, dt);
    }
    xs.push_back(q);
    ps.push_back(p);
    ys.push_back(bundle.rotate_fiber(q, -phi * static_cast<double>(i) / samples));
  }
  const double ds = 1.0 / samples;
  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < ys.size(); ++i) {
    const double angle = -phi * static_cast<double>(i) / samples;
    const Vec qdot = bundle.inverse_metric_at(xs[i]) * ps[i];
    // differential of the fiber rotation applied to qdot
    const Vec pushed = (bundle.rotate_fiber(xs[i] + eps * qdot, angle) -
                        bundle.rotate_fiber(xs[i] - eps * qdot, angle)) /
                       (2.0 * eps);
    const Vec expected = -phi * bundle.fundamental_field_at(ys[i]) + period * pushed;
    worst = std::max(worst, (central_derivative(ys, i, ds, false) - expected).norm());
  }
  return worst;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  if (traj.size() == 0) return;
  const auto& s0 = traj.states.front();
  const char* vname = s0.rep == Representation::Tangent ? "v" : "p";
  out << "t";
  for (int i = 0; i < s0.position.size(); ++i) out << ",q" << i;
  for (int i = 0; i < s0.vector.size(); ++i) out << ',' << vname << i;
  for (const auto& name : traj.invariant_names) out << ',' << name;
  out << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < traj.size(); ++r) {
    out << traj.times[r];
    for (int i = 0; i < traj.states[r].position.size(); ++i) out << ',' << traj.states[r].position(i);
    for (int i = 0; i < traj.states[r].vector.size(); ++i) out << ',' << traj.states[r].vector(i);
    for (double val : traj.invariants[r]) out << ',' << val;
    out << '\n';
  }
}

}  // namespace maggeo
