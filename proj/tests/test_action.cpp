#include <doctest.h>

#include "generators.hpp"
#include "maggeo/action.hpp"

#include <cmath>

using namespace maggeo;
using maggeo::testing::Gen;

namespace {

const FlatTorusBundle torus1(1);
const HopfSphereBundle hopf;

std::vector<const BundleModel*> bundles() { return {&torus1, &hopf}; }

ExtendedLoop displaced(const ExtendedLoop& x, const Eigen::MatrixXd& xi, double tau, double psi,
                       double h) {
  ExtendedLoop y = x;
  y.samples += h * xi;
  y.T += h * tau;
  y.phi += h * psi;
  return y;
}

double fd_directional(const BundleModel& b, const ExtendedLoop& x, const Eigen::MatrixXd& xi,
                      double tau, double psi, double h = 1e-5) {
  return (action_eval(b, displaced(x, xi, tau, psi, h)) -
          action_eval(b, displaced(x, xi, tau, psi, -h))) /
         (2.0 * h);
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("action of fiberwise rotations and constant loops") {
  Gen gen(61);
  for (int a : {-2, -1, 1, 3}) {
    const Vec q0 = gen.point(torus1);
    const ExtendedLoop x = fiberwise_rotation(torus1, q0, a, 0.5, 1.0, 64);
    CHECK(action_eval(torus1, x) == -kTwoPi * a + 0.5);
    // on S^3 the stencil sees a rotation, exact up to O(N^-4)
    const ExtendedLoop y = fiberwise_rotation(hopf, gen.point(hopf), a, 0.5, 1.0, 256);
    CHECK(std::abs(action_eval(hopf, y) - (-kTwoPi * a + 0.5)) < 1e-8);
  }
  for (const BundleModel* b : bundles()) {
    ExtendedLoop c;
    c.samples = gen.point(*b).replicate(1, 32);
    c.T = 1.7;
    c.k = 1.3;
    CHECK(action_eval(*b, c) == doctest::Approx(1.3 * 1.7).epsilon(1e-15));
  }
  ExtendedLoop bad = fiberwise_rotation(torus1, gen.point(torus1), 1, 0.5, 1.0, 16);
  bad.T = 0.0;
  CHECK_THROWS_AS(action_eval(torus1, bad), PreconditionError);
}

TEST_CASE("action converges under grid refinement") {
  Gen gen(67);
  for (const BundleModel* b : bundles()) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto shape = gen.shape(*b);
      const double fine = action_eval(*b, shape.sample(1024));
      for (int order : {2, 4}) {
        set_stencil_order(order);
        const double e1 = std::abs(action_eval(*b, shape.sample(64)) - fine);
        const double e2 = std::abs(action_eval(*b, shape.sample(256)) - fine);
        // N -> 4N gains at least 4^order / 2
        CHECK(e2 < e1 / (order == 2 ? 8.0 : 128.0));
      }
      set_stencil_order(4);
    }
  }
}

TEST_CASE("analytic gradient matches finite differences") {
  Gen gen(71);
  for (int order : {2, 4}) {
    set_stencil_order(order);
    for (const BundleModel* b : bundles()) {
      for (int trial = 0; trial < 100; ++trial) {
        const ExtendedLoop x = gen.rough_loop(*b, 16 + 8 * (trial % 3));
        const Eigen::MatrixXd xi = gen.tangent_field(*b, x);
        const double tau = gen.normal(), psi = gen.normal();
        const double an = pairing(action_differential(*b, x), xi, tau, psi);
        const double fd = fd_directional(*b, x, xi, tau, psi);
        CHECK(std::abs(an - fd) <= 1e-6 * std::max(std::abs(an), std::abs(fd)));
      }
    }
  }
  set_stencil_order(4);
}

TEST_CASE("gradient of a fiberwise rotation") {
  Gen gen(73);
  for (const BundleModel* b : bundles()) {
    const ExtendedLoop x = fiberwise_rotation(*b, gen.point(*b), 2, 0.7, 1.4, 256);
    const double tol = b->name() == "torus" ? 1e-10 : 1e-5;
    const LoopCotangent d = action_differential(*b, x);
    CHECK(d.loop.norm() < tol);
    CHECK(std::abs(d.dT - 1.4) < tol);
    CHECK(std::abs(d.dphi + 1.0) < tol);
  }
}

TEST_CASE("Riesz gradients are descent directions of the right size") {
  Gen gen(79);
  for (const BundleModel* b : bundles()) {
    for (int trial = 0; trial < 20; ++trial) {
      const ExtendedLoop x = gen.shape(*b).sample(64);
      const LoopCotangent d = action_differential(*b, x);
      for (GradientMetric m : {GradientMetric::L2, GradientMetric::H1}) {
        const LoopCotangent g = riesz_gradient(*b, x, d, m);
        const double n2 = gradient_norm_sq(d, g);
        CHECK(n2 > 0.0);
        CHECK(pairing(d, g.loop, g.dT, g.dphi) == doctest::Approx(n2).epsilon(1e-12));
        // the gradient is tangent to the constraint set
        for (int i = 0; i < x.size(); ++i) {
          const Vec q = x.samples.col(i);
          CHECK((b->tangent_projection(q, g.loop.col(i)) - g.loop.col(i)).norm() < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("H1 representative solves the discrete Sobolev system") {
  Gen gen(83);
  const ExtendedLoop x = gen.shape(torus1).sample(32);
  const LoopCotangent d = action_differential(torus1, x);
  const LoopCotangent g = riesz_gradient(torus1, x, d, GradientMetric::H1);
  const int n = x.size();
  for (int i = 0; i < n; ++i) {
    const Vec lap = 2.0 * g.loop.col(i) - g.loop.col((i + 1) % n) - g.loop.col((i + n - 1) % n);
    const Vec lhs = (g.loop.col(i) + static_cast<double>(n) * n * lap) / n;
    CHECK((lhs - d.loop.col(i)).norm() < 1e-10);
  }
}

TEST_CASE("stationarity in T and phi gives the discrete integral identities") {
  Gen gen(89);
  for (const BundleModel* b : bundles()) {
    ExtendedLoop x = gen.shape(*b).sample(64);
    // solve dT = 0 and dphi = 0 for (T, phi) by fixed-point on the closed forms
    for (int it = 0; it < 200; ++it) {
      const Eigen::MatrixXd d = loop_derivative(*b, x);
      double fiber = 0.0, zz = 0.0;
      for (int i = 0; i < x.size(); ++i) {
        const Vec q = x.samples.col(i);
        fiber += d.col(i).dot(b->metric_at(q) * b->fundamental_field_at(q));
        zz += 1.0;
      }
      x.phi = x.T - fiber / zz;
      x.T = std::sqrt(loop_energy(*b, x) / (2.0 * x.k));
    }
    const LoopCotangent g = action_differential(*b, x);
    CHECK(std::abs(g.dT) < 1e-10);
    CHECK(std::abs(g.dphi) < 1e-10);
    const Eigen::MatrixXd d = loop_derivative(*b, x);
    double fiber = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      const Vec q = x.samples.col(i);
      fiber += d.col(i).dot(b->metric_at(q) * b->fundamental_field_at(q));
    }
    CHECK(fiber / x.size() == doctest::Approx(x.T - x.phi).epsilon(1e-9));
    CHECK(loop_energy(*b, x) == doctest::Approx(2.0 * x.T * x.T * x.k).epsilon(1e-9));
  }
}

TEST_CASE("Heisenberg action") {
  Gen gen(97);
  for (const BundleModel* b : bundles()) {
    const ExtendedLoop x = gen.shape(*b).sample(64);
    const double s0 = action_eval(*b, x);
    const ExtendedLoop id = heisenberg_act(*b, x, 0.0, 0.0, 0);
    CHECK((id.samples - x.samples).norm() == 0.0);
    CHECK(action_eval(*b, id) == s0);
    // fiber rotation and grid shifts are exact symmetries of the discrete functional
    const ExtendedLoop y = heisenberg_act(*b, x, 0.37, 5.0 / 64.0, 0);
    CHECK(std::abs(action_eval(*b, y) - s0) < 1e-12);
  }
  // on the nilmanifold the t-dependent rotation is a z-translation: exact
  for (int u : {1, -2, 3}) {
    const ExtendedLoop x = gen.shape(torus1).sample(64);
    const ExtendedLoop y = heisenberg_act(torus1, x, 0.3, 7.0 / 64.0, u);
    CHECK(std::abs(action_eval(torus1, y) - action_eval(torus1, x) - kTwoPi * u) < 1e-12);
  }
  // on S^3 the shift holds up to the discretization error
  const auto shape = gen.shape(hopf);
  double prev = 1.0;
  for (int n : {32, 64, 128}) {
    const ExtendedLoop x = shape.sample(n);
    const ExtendedLoop y = heisenberg_act(hopf, x, 0.3, 0.0, -2);
    const double err = std::abs(action_eval(hopf, y) - action_eval(hopf, x) + 2.0 * kTwoPi);
    CHECK(err < prev / 4.0);
    prev = err;
  }
}

TEST_CASE("Heisenberg action with off-grid shifts converges") {
  Gen gen(101);
  for (const BundleModel* b : bundles()) {
    const auto shape = gen.shape(*b);
    double prev = 1.0;
    for (int n : {32, 64, 128, 256}) {
      const ExtendedLoop x = shape.sample(n);
      const int u = b->name() == "torus" ? -2 : 0;
      const ExtendedLoop y = heisenberg_act(*b, x, 0.3, 0.3183, u);
      const double err = std::abs(action_eval(*b, y) - action_eval(*b, x) - kTwoPi * u);
      CHECK(err < prev / 4.0);
      prev = err;
    }
  }
}

TEST_CASE("Legendre lift reproduces the action") {
  Gen gen(103);
  for (const BundleModel* b : bundles()) {
    for (int trial = 0; trial < 50; ++trial) {
      const ExtendedLoop x = gen.rough_loop(*b, 32);
      const PhaseLoop y = legendre_lift(*b, x);
      const double s = action_eval(*b, x);
      CHECK(std::abs(rabinowitz_eval(*b, y, x) - s) < 1e-10 * std::max(1.0, std::abs(s)));
    }
    const ExtendedLoop f = fiberwise_rotation(*b, gen.point(*b), 1, 0.8, 1.2, 256);
    const double tol = b->name() == "torus" ? 1e-10 : 1e-5;
    const PhaseLoop y = legendre_lift(*b, f);
    CHECK(y.p.norm() < tol);
    CHECK(std::abs(rabinowitz_eval(*b, y, f) - (0.8 * 1.2 - kTwoPi)) < tol);
  }
}

TEST_CASE("guard membership") {
  Gen gen(107);
  const double delta = 1e-2;
  const ExtendedLoop f = fiberwise_rotation(torus1, gen.point(torus1), 3, 0.3, 1.0, 32);
  CHECK(guard_membership(torus1, f, delta) == 3);

  // loop energy delta / 2 and phi = 6 pi + 0.5 sqrt(delta)
  ExtendedLoop x = f;
  x.phi = 6.0 * kPi + 0.5 * std::sqrt(delta);
  const double excess = x.phi - 6.0 * kPi;
  // add a small horizontal wiggle to reach energy delta / 2 in total
  const double target = delta / 2.0 - excess * excess;
  const double amp = std::sqrt(2.0 * target) / kTwoPi;
  for (int i = 0; i < x.size(); ++i) x.samples(0, i) += amp * std::sin(kTwoPi * i / x.size());
  const double q = loop_energy(torus1, x);
  CHECK(q == doctest::Approx(delta / 2.0).epsilon(1e-3));
  REQUIRE(guard_membership(torus1, x, delta).has_value());
  CHECK(*guard_membership(torus1, x, delta) == 3);
  CHECK(std::abs(x.phi - 6.0 * kPi) < std::sqrt(delta));

  ExtendedLoop far = gen.shape(torus1).sample(32);
  CHECK(loop_energy(torus1, far) >= delta);
  CHECK_FALSE(guard_membership(torus1, far, delta).has_value());
}

TEST_CASE("lifted oracle orbits are critical points") {
  // torus: circle of radius 2 pi, period 4 pi^2; |gamma' + phi Z|^2 = 2 T^2 k is
  // about 3000 here, so the absolute residuals need N = 512 to drop below 1e-4
  const LiftedOrbit o = lift_orbit(torus1, vec2(0.5, 0.5), vec2(1, 0), 4 * kPi * kPi, 512);
  const ExtendedLoop x = loop_from_orbit(o);
  const CriticalResiduals r = critical_residuals(torus1, x);
  CHECK(r.max() < 1e-4);
  const LoopCotangent d = action_differential(torus1, x);
  CHECK(std::abs(d.dT) < 1e-6);
  CHECK(std::abs(d.dphi) < 1e-6);
  const auto [dT, dphi] = rabinowitz_partials(torus1, legendre_lift(torus1, x), x.k);
  CHECK(std::abs(dT) < 1e-6);
  CHECK(std::abs(dphi) < 1e-6);
  CHECK(action_eval(torus1, x) == doctest::Approx(2.0 * x.k * x.T - x.phi).epsilon(1e-8));

  // fiberwise rotations: <gamma', Z> = -phi, so the fiber-speed identity is off by T
  const ExtendedLoop f = fiberwise_rotation(torus1, o.q0, 2, 0.9, 1.0, 64);
  CHECK(critical_residuals(torus1, f).fiber_speed == doctest::Approx(0.9));
}

TEST_CASE("lifted circle on the Hopf base") {
  const double kbar = 0.5, r = 0.5, kappa = 2.0;
  const double alpha = std::atan(1.0 / (kappa * r));
  Vec q0(3), v0(3);
  q0 << r * std::sin(alpha), 0.0, r * std::cos(alpha);
  v0 << 0.0, 1.0, 0.0;
  const double period = kTwoPi * r * std::sin(alpha);
  const LiftedOrbit o = lift_orbit(hopf, q0, v0, period, 128, 1e-4);
  const ExtendedLoop x = loop_from_orbit(o);
  CHECK(o.k == doctest::Approx(kbar + 0.5));
  CHECK(critical_residuals(hopf, x).max() < 1e-4);
  const CurvatureStats k = loop_geodesic_curvature(hopf, x);
  CHECK(std::abs(k.mean - kappa) < 1e-4);
}
