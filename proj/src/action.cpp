#include "maggeo/action.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>

namespace maggeo {

namespace {

std::atomic<int> g_order{4};

// Antisymmetric first-derivative weights c_m: d_i = N sum_m c_m (q_{i+m} - q_{i-m}).
std::vector<double> first_weights() {
  if (g_order.load() == 2) return {0.5};
  return {2.0 / 3.0, -1.0 / 12.0};
}

// Symmetric second-derivative weights: dd_i = N^2 (w_0 q_i + sum_m w_m (q_{i+m} + q_{i-m})).
std::vector<double> second_weights() {
  if (g_order.load() == 2) return {-2.0, 1.0};
  return {-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0};
}

int floor_div(int j, int n) { return j >= 0 ? j / n : -((-j + n - 1) / n); }

void require_positive_period(const ExtendedLoop& x) {
  if (!(x.T > 0.0)) throw PreconditionError("period T must be positive");
  if (x.size() < 8) throw PreconditionError("a loop needs at least 8 samples");
}

Vec column(const Eigen::MatrixXd& m, int i) { return m.col(i); }

// d^2 tau(v, v) by a second difference; exact for the affine and quadratic
// projections of the built-in models.
Vec projection_hessian(const BundleModel& bundle, const Vec& q, const Vec& v) {
  const double h = 1e-2 / std::max(1.0, v.norm());
  return (bundle.project(q + h * v) - 2.0 * bundle.project(q) + bundle.project(q - h * v)) /
         (h * h);
}

}  // namespace

int stencil_order() { return g_order.load(); }

void set_stencil_order(int order) {
  if (order != 2 && order != 4) throw PreconditionError("stencil order must be 2 or 4");
  g_order.store(order);
}

void validate_loop(const BundleModel& bundle, const ExtendedLoop& x) {
  require_positive_period(x);
  if (x.samples.rows() != bundle.ambient_dim()) {
    throw PreconditionError("loop samples have the wrong ambient dimension");
  }
  if (!x.samples.allFinite() || !std::isfinite(x.T) || !std::isfinite(x.phi) ||
      !std::isfinite(x.k)) {
    throw PreconditionError("loop has non-finite entries");
  }
  for (int i = 0; i < x.size(); ++i) {
    const Vec q = x.samples.col(i);
    if ((bundle.normalize(q) - q).norm() > 1e-8) {
      throw PreconditionError("loop sample " + std::to_string(i) + " violates the model constraint");
    }
  }
}

Vec loop_sample(const BundleModel& bundle, const ExtendedLoop& x, int j) {
  const int n = x.size();
  const int power = floor_div(j, n);
  const Vec q = x.samples.col(j - power * n);
  if (power == 0) return q;
  Vec out = q;
  const int step = power > 0 ? 1 : -1;
  for (int p = 0; p != power; p += step) out = bundle.deck(out, x.winding, step);
  return out;
}

Eigen::MatrixXd loop_derivative(const BundleModel& bundle, const ExtendedLoop& x) {
  const int n = x.size();
  const auto c = first_weights();
  const int pad = static_cast<int>(c.size());
  std::vector<Vec> g;
  for (int j = -pad; j < n + pad; ++j) g.push_back(loop_sample(bundle, x, j));
  Eigen::MatrixXd d(x.samples.rows(), n);
  for (int i = 0; i < n; ++i) {
    Vec acc = Vec::Zero(x.samples.rows());
    for (int m = 1; m <= pad; ++m) {
      acc += c[m - 1] * (g[i + pad + m] - g[i + pad - m]);
    }
    d.col(i) = n * acc;
  }
  return d;
}

Eigen::MatrixXd loop_second_derivative(const BundleModel& bundle, const ExtendedLoop& x) {
  const int n = x.size();
  const auto w = second_weights();
  const int pad = static_cast<int>(w.size()) - 1;
  std::vector<Vec> g;
  for (int j = -pad; j < n + pad; ++j) g.push_back(loop_sample(bundle, x, j));
  Eigen::MatrixXd dd(x.samples.rows(), n);
  const double n2 = static_cast<double>(n) * n;
  for (int i = 0; i < n; ++i) {
    Vec acc = w[0] * g[i + pad];
    for (int m = 1; m <= pad; ++m) acc += w[m] * (g[i + pad + m] + g[i + pad - m]);
    dd.col(i) = n2 * acc;
  }
  return dd;
}

double loop_energy(const BundleModel& bundle, const ExtendedLoop& x) {
  require_positive_period(x);
  const Eigen::MatrixXd d = loop_derivative(bundle, x);
  double sum = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const Vec q = x.samples.col(i);
    const Vec e = column(d, i) + x.phi * bundle.fundamental_field_at(q);
    sum += e.dot(bundle.metric_at(q) * e);
  }
  return sum / x.size();
}

double action_eval(const BundleModel& bundle, const ExtendedLoop& x) {
  require_positive_period(x);
  return loop_energy(bundle, x) / (2.0 * x.T) - x.phi + x.k * x.T;
}

LoopCotangent action_differential(const BundleModel& bundle, const ExtendedLoop& x) {
  require_positive_period(x);
  const int n = x.size();
  const int dim = static_cast<int>(x.samples.rows());
  const auto c = first_weights();
  const Eigen::MatrixXd d = loop_derivative(bundle, x);

  LoopCotangent out;
  out.loop = Eigen::MatrixXd::Zero(dim, n);
  double energy = 0.0, fiber = 0.0;
  std::vector<Vec> w(n);
  for (int i = 0; i < n; ++i) {
    const Vec q = x.samples.col(i);
    const Vec z = bundle.fundamental_field_at(q);
    const Mat g = bundle.metric_at(q);
    const Vec e = column(d, i) + x.phi * z;
    w[i] = g * e;
    energy += e.dot(w[i]);
    fiber += z.dot(w[i]);
    // own-sample dependence through G(q) and Z(q)
    out.loop.col(i) += (2.0 * x.phi * bundle.fundamental_jacobian(q).transpose() * w[i] +
                        bundle.metric_quadratic_gradient(q, e)) /
                       (2.0 * x.T * n);
  }
  // dependence through the derivative stencil, ghosts carry the deck's linear part
  for (int j = 0; j < n; ++j) {
    for (int m = 1; m <= static_cast<int>(c.size()); ++m) {
      const double coef = c[m - 1] / x.T;
      for (int sign : {1, -1}) {
        const int idx = j + sign * m;
        const int power = floor_div(idx, n);
        const int i = idx - power * n;
        Vec contrib = w[j];
        if (power != 0) contrib = bundle.deck_linear(x.winding, power).transpose() * w[j];
        out.loop.col(i) += sign * coef * contrib;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    const Vec q = x.samples.col(i);
    out.loop.col(i) = bundle.tangent_projection(q, out.loop.col(i));
  }
  energy /= n;
  fiber /= n;
  out.dT = x.k - energy / (2.0 * x.T * x.T);
  out.dphi = fiber / x.T - 1.0;
  out.metric = GradientMetric::L2;
  return out;
}

LoopCotangent riesz_gradient(const BundleModel& bundle, const ExtendedLoop& x,
                             const LoopCotangent& differential, GradientMetric metric) {
  const int n = x.size();
  LoopCotangent out = differential;
  out.metric = metric;
  if (metric == GradientMetric::L2) {
    out.loop = differential.loop * static_cast<double>(n);
    return out;
  }
  // (1/N) K v = c with K = I + N^2 (circulant second difference)
  Eigen::FFT<double> fft;
  const double n2 = static_cast<double>(n) * n;
  std::vector<double> lambda(n);
  for (int j = 0; j < n; ++j) lambda[j] = 1.0 + 2.0 * n2 * (1.0 - std::cos(kTwoPi * j / n));
  std::vector<double> row(n), sol(n);
  std::vector<std::complex<double>> spec;
  for (int r = 0; r < differential.loop.rows(); ++r) {
    for (int i = 0; i < n; ++i) row[i] = differential.loop(r, i);
    fft.fwd(spec, row);
    for (int j = 0; j < n; ++j) spec[j] /= lambda[j];
    fft.inv(sol, spec);
    for (int i = 0; i < n; ++i) out.loop(r, i) = n * sol[i];
  }
  for (int i = 0; i < n; ++i) {
    const Vec q = x.samples.col(i);
    out.loop.col(i) = bundle.tangent_projection(q, out.loop.col(i));
  }
  return out;
}

LoopCotangent action_gradient(const BundleModel& bundle, const ExtendedLoop& x,
                              GradientMetric metric) {
  return riesz_gradient(bundle, x, action_differential(bundle, x), metric);
}

double gradient_norm_sq(const LoopCotangent& differential, const LoopCotangent& gradient) {
  return (differential.loop.array() * gradient.loop.array()).sum() +
         differential.dT * gradient.dT + differential.dphi * gradient.dphi;
}

double pairing(const LoopCotangent& differential, const Eigen::MatrixXd& xi, double tau,
               double psi) {
  return (differential.loop.array() * xi.array()).sum() + differential.dT * tau +
         differential.dphi * psi;
}

double CriticalResiduals::max() const {
  return std::max({fiber_speed, energy_density, magnetic_ode, base_energy});
}

CriticalResiduals critical_residuals(const BundleModel& bundle, const ExtendedLoop& x) {
  require_positive_period(x);
  const int n = x.size();
  const ManifoldModel& base = bundle.base();
  const Eigen::MatrixXd d = loop_derivative(bundle, x);

  CriticalResiduals r;
  for (int i = 0; i < n; ++i) {
    const Vec q = x.samples.col(i);
    const Vec z = bundle.fundamental_field_at(q);
    const Mat g = bundle.metric_at(q);
    const Vec di = d.col(i);
    const Vec e = di + x.phi * z;
    r.fiber_speed = std::max(r.fiber_speed, std::abs(di.dot(g * z) - (x.T - x.phi)));
    r.energy_density = std::max(r.energy_density, std::abs(e.dot(g * e) - 2.0 * x.T * x.T * x.k));
  }

  // projected curve mu(t) = tau(gamma(t / T))
  const Eigen::MatrixXd ms = loop_derivative(bundle, x);
  const Eigen::MatrixXd mss = loop_second_derivative(bundle, x);
  for (int i = 0; i < n; ++i) {
    const Vec q = x.samples.col(i);
    const Mat jac = bundle.project_jacobian(q);
    const Vec xb = base.project_point(bundle.project(q));
    // chain rule through tau: mu' = dtau gamma', mu'' = dtau gamma'' + d^2 tau(gamma', gamma')
    const Vec g1 = ms.col(i);
    const Vec g2 = mss.col(i);
    const Vec curv = projection_hessian(bundle, q, g1);
    const Vec vel = jac * g1 / x.T;
    const Vec acc = (jac * g2 + curv) / (x.T * x.T);
    const Vec cov = base.project_vector(xb, acc + base.christoffel_contract(xb, vel, vel));
    r.magnetic_ode = std::max(r.magnetic_ode, (cov - lorentz_force(base, xb, vel)).norm());
    const double kin = 0.5 * vel.dot(base.metric_at(xb) * vel);
    r.base_energy = std::max(r.base_energy, std::abs(kin - (x.k - 0.5)));
  }
  return r;
}

CurvatureStats loop_geodesic_curvature(const BundleModel& bundle, const ExtendedLoop& x) {
  require_positive_period(x);
  const int n = x.size();
  const ManifoldModel& base = bundle.base();
  const Eigen::MatrixXd ms = loop_derivative(bundle, x);
  const Eigen::MatrixXd mss = loop_second_derivative(bundle, x);
  CurvatureStats st;
  st.min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const Vec q = x.samples.col(i);
    const Mat jac = bundle.project_jacobian(q);
    const Vec xb = base.project_point(bundle.project(q));
    const Vec g1 = ms.col(i);
    const Vec curv = projection_hessian(bundle, q, g1);
    const Vec vel = jac * g1;
    const Vec acc = jac * mss.col(i) + curv;
    const Vec cov = base.project_vector(xb, acc + base.christoffel_contract(xb, vel, vel));
    const Mat g = base.metric_at(xb);
    const double kappa = std::sqrt(cov.dot(g * cov)) / vel.dot(g * vel);
    st.mean += kappa;
    st.min = std::min(st.min, kappa);
    st.max = std::max(st.max, kappa);
  }
  st.mean /= n;
  return st;
}

ExtendedLoop heisenberg_act(const BundleModel& bundle, const ExtendedLoop& x, double r, double s,
                            int u) {
  require_positive_period(x);
  const int n = x.size();
  const double shift = s * n;
  const int j0 = static_cast<int>(std::floor(shift));
  const double f = shift - j0;
  const bool on_grid = std::abs(f) < 1e-12 || std::abs(f - 1.0) < 1e-12;
  const int base_index = on_grid ? static_cast<int>(std::lround(shift)) : j0;

  ExtendedLoop out = x;
  out.phi = x.phi - kTwoPi * u;
  if (bundle.name() == "torus") out.winding[2] += u;
  for (int i = 0; i < n; ++i) {
    Vec q;
    if (on_grid) {
      q = loop_sample(bundle, x, i + base_index);
    } else {
      // cubic Lagrange through nodes -1, 0, 1, 2 around the shifted point
      const double wm = -f * (f - 1.0) * (f - 2.0) / 6.0;
      const double w0 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
      const double w1 = -(f + 1.0) * f * (f - 2.0) / 2.0;
      const double w2 = (f + 1.0) * f * (f - 1.0) / 6.0;
      q = wm * loop_sample(bundle, x, i + j0 - 1) + w0 * loop_sample(bundle, x, i + j0) +
          w1 * loop_sample(bundle, x, i + j0 + 1) + w2 * loop_sample(bundle, x, i + j0 + 2);
      q = bundle.normalize(q);
    }
    const double t = static_cast<double>(i) / n;
    out.samples.col(i) = bundle.rotate_fiber(q, kTwoPi * (u * t + r));
  }
  return out;
}

ExtendedLoop fiberwise_rotation(const BundleModel& bundle, const Vec& q0, int a, double T,
                                double k, int n) {
  if (n < 8) throw PreconditionError("a loop needs at least 8 samples");
  ExtendedLoop x;
  x.T = T;
  x.k = k;
  x.phi = kTwoPi * a;
  x.samples.resize(bundle.ambient_dim(), n);
  for (int i = 0; i < n; ++i) {
    x.samples.col(i) = bundle.rotate_fiber(q0, -kTwoPi * a * static_cast<double>(i) / n);
  }
  if (bundle.name() == "torus") x.winding[2] = -a;
  return x;
}

std::optional<int> guard_membership(const BundleModel& bundle, const ExtendedLoop& x,
                                    double delta) {
  if (!(delta > 0.0)) throw PreconditionError("delta must be positive");
  if (loop_energy(bundle, x) >= delta) return std::nullopt;
  const int a = static_cast<int>(std::lround(x.phi / kTwoPi));
  if (std::abs(x.phi - kTwoPi * a) >= std::sqrt(delta)) {
    throw GeometryError("guard set point with phi far from 2 pi Z");
  }
  return a;
}

PhaseLoop legendre_lift(const BundleModel& bundle, const ExtendedLoop& x) {
  require_positive_period(x);
  const Eigen::MatrixXd d = loop_derivative(bundle, x);
  PhaseLoop y;
  y.q = x.samples;
  y.p.resize(x.samples.rows(), x.size());
  y.winding = x.winding;
  for (int i = 0; i < x.size(); ++i) {
    const Vec q = x.samples.col(i);
    const Vec e = column(d, i) + x.phi * bundle.fundamental_field_at(q);
    y.p.col(i) = bundle.metric_at(q) * e / x.T;
  }
  return y;
}

double rabinowitz_eval(const BundleModel& bundle, const PhaseLoop& y, const ExtendedLoop& x) {
  require_positive_period(x);
  ExtendedLoop shape = x;
  shape.samples = y.q;
  shape.winding = y.winding;
  const Eigen::MatrixXd d = loop_derivative(bundle, shape);
  const int n = static_cast<int>(y.q.cols());
  double liouville = 0.0, hamiltonian = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec q = y.q.col(i);
    const Vec p = y.p.col(i);
    liouville += p.dot(d.col(i));
    const double h = bundle.kinetic_energy(q, p) - x.k;
    const double a = bundle.moment(q, p) - 1.0;
    hamiltonian += x.T * h - x.phi * a;
  }
  return (liouville - hamiltonian) / n;
}

std::pair<double, double> rabinowitz_partials(const BundleModel& bundle, const PhaseLoop& y,
                                              double k) {
  const int n = static_cast<int>(y.q.cols());
  double h = 0.0, a = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec q = y.q.col(i);
    const Vec p = y.p.col(i);
    h += bundle.kinetic_energy(q, p) - k;
    a += bundle.moment(q, p) - 1.0;
  }
  return {-h / n, a / n};
}

ExtendedLoop loop_from_orbit(const LiftedOrbit& orbit) {
  ExtendedLoop x;
  x.samples = orbit.samples;
  x.T = orbit.period;
  x.phi = orbit.phi;
  x.k = orbit.k;
  return x;
}

}  // namespace maggeo
