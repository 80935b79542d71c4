#include <doctest.h>

#include "generators.hpp"
#include "maggeo/flow.hpp"

#include <cmath>

using namespace maggeo;
using maggeo::testing::Gen;

namespace {

const FlatTorusBundle torus1(1);
const HopfSphereBundle hopf;

std::vector<const BundleModel*> bundles() { return {&torus1, &hopf}; }

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Fiberwise rotation with a small smooth horizontal wiggle.
ExtendedLoop near_fiber(const BundleModel& b, Gen& gen, int a, double T, double k, int n,
                        double amp) {
  ExtendedLoop x = fiberwise_rotation(b, gen.point(b), a, T, k, n);
  for (int i = 0; i < n; ++i) {
    const Vec q = x.samples.col(i);
    const Mat hb = b.horizontal_basis(q);
    const double t = static_cast<double>(i) / n;
    x.samples.col(i) = b.normalize(Vec(q + amp * std::sin(kTwoPi * t) * hb.col(0) +
                                       amp * std::cos(kTwoPi * t) * hb.col(1)));
  }
  return x;
}

ExtendedLoop perturbed_torus_circle(int n) {
  const LiftedOrbit o = lift_orbit(torus1, vec2(0.5, 0.5), vec2(1, 0), 4 * kPi * kPi, n);
  ExtendedLoop x = loop_from_orbit(o);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) x.samples(a, i) += 0.01 * std::sin(kTwoPi * i * (a + 1.0) / n + a);
  }
  x.T *= 1.01;
  x.phi += 0.05;
  return x;
}

}  // namespace

TEST_CASE("flow configuration defaults") {
  FlowConfig cfg;
  CHECK(flow_epsilon(cfg, 1.0) == doctest::Approx((std::sqrt(2.0) - 1.0) * 0.1));
  CHECK(flow_T0(cfg, 1.0) == doctest::Approx((std::sqrt(2.0) - 1.0) * 0.1 / 4.0));
  CHECK(flow_T0(cfg, 200.0) == doctest::Approx(0.1).epsilon(0.1));
  CHECK_THROWS_WITH_AS(validate_flow_config(cfg, 0.4), "k must exceed 1/2", PreconditionError);
  cfg.delta = 0.0;
  CHECK_THROWS_AS(validate_flow_config(cfg, 1.0), PreconditionError);
}

TEST_CASE("truncated field is a bounded multiple of the negative gradient") {
  Gen gen(113);
  for (const BundleModel* b : bundles()) {
    for (int trial = 0; trial < 20; ++trial) {
      const ExtendedLoop x = gen.shape(*b).sample(32);
      for (GradientMetric m : {GradientMetric::L2, GradientMetric::H1}) {
        const FieldEval f = truncated_field(*b, x, m);
        CHECK(f.field_norm < 1.0);
        const LoopCotangent g = action_gradient(*b, x, m);
        const double dot = -((f.field.loop.array() * g.loop.array()).sum() +
                             f.field.dT * g.dT + f.field.dphi * g.dphi);
        const double nf = std::sqrt(f.field.loop.squaredNorm() + f.field.dT * f.field.dT +
                                    f.field.dphi * f.field.dphi);
        const double ng = std::sqrt(g.loop.squaredNorm() + g.dT * g.dT + g.dphi * g.dphi);
        CHECK(dot / (nf * ng) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("flows starting in a low guard component truncate immediately") {
  Gen gen(127);
  FlowConfig cfg;
  for (const BundleModel* b : bundles()) {
    for (int a : {1, 2, -1}) {
      const double k = 1.0;
      const ExtendedLoop x = near_fiber(*b, gen, a, flow_T0(cfg, k) / 2.0, k, 64, 1e-4);
      const double eps = flow_epsilon(cfg, k);
      REQUIRE(action_eval(*b, x) < -kTwoPi * a + eps / 4.0);
      const FlowOutcome out = evolve(*b, x, cfg);
      CHECK(out.status == FlowStatus::Truncated);
      REQUIRE(out.truncation_index.has_value());
      CHECK(*out.truncation_index == a);
      CHECK(out.steps == 0);
    }
  }
}

TEST_CASE("flow traces are monotone and steps bounded") {
  Gen gen(131);
  FlowConfig cfg;
  cfg.max_steps = 60;
  for (const BundleModel* b : bundles()) {
    for (int trial = 0; trial < 3; ++trial) {
      auto shape = gen.shape(*b);
      shape.k = 1.2;
      const ExtendedLoop x = shape.sample(32);
      const FlowOutcome out = evolve(*b, x, cfg);
      for (std::size_t i = 1; i < out.action_trace.size(); ++i) {
        CHECK(out.action_trace[i] <= out.action_trace[i - 1] + 1e-10 * cfg.step);
        CHECK(std::abs(out.period_trace[i] - out.period_trace[i - 1]) <= cfg.step);
      }
    }
  }
}

TEST_CASE("flow toward T = 0 outside the guard sets is abnormal") {
  Gen gen(137);
  FlowConfig cfg;
  cfg.delta = 1e-14;  // guard sets too thin to catch the fiber
  cfg.T_min = 0.05;
  cfg.max_steps = 1000;
  const ExtendedLoop x = near_fiber(torus1, gen, 1, 0.3, 1.0, 32, 1e-3);
  const FlowOutcome out = evolve(torus1, x, cfg);
  CHECK(out.status == FlowStatus::Abnormal);
  CHECK_FALSE(out.message.empty());
}

TEST_CASE("descend converges to the torus circle") {
  FlowConfig cfg;
  cfg.max_steps = 50;
  const DescendResult r = descend(torus1, perturbed_torus_circle(128), cfg, PolishConfig{});
  CHECK(r.status == FlowStatus::Critical);
  REQUIRE(r.polish.has_value());
  CHECK(std::abs(r.polish->dT) < 1e-8);
  CHECK(std::abs(r.polish->dphi) < 1e-8);
  CHECK(r.candidate.T == doctest::Approx(4 * kPi * kPi).epsilon(1e-6));
  CHECK(r.residuals.max() < 1e-4);

  // the polished point is a zero of the truncated field
  const FieldEval f = truncated_field(torus1, r.candidate);
  CHECK(f.field_norm < 1e-9);

  // phi = 2 k T - c at critical points
  const double c = action_eval(torus1, r.candidate);
  CHECK(std::abs(r.candidate.phi - (2.0 * r.candidate.k * r.candidate.T - c)) <
        1e-7 * (1.0 + r.candidate.T));

  // Legendre partials vanish there too
  const auto [pT, pphi] = rabinowitz_partials(torus1, legendre_lift(torus1, r.candidate),
                                              r.candidate.k);
  CHECK(std::abs(pT) < 1e-6);
  CHECK(std::abs(pphi) < 1e-6);
}

TEST_CASE("near-critical points with small period lie in a guard set") {
  Gen gen(139);
  const double delta = 1e-2, k = 1.0;
  for (const BundleModel* b : bundles()) {
    for (int a : {1, -2}) {
      ExtendedLoop x = near_fiber(*b, gen, a, 0.05, k, 64, 2e-3);
      // make dT = dphi = 0 by solving the closed forms for (T, phi)
      for (int it = 0; it < 100; ++it) {
        const Eigen::MatrixXd d = loop_derivative(*b, x);
        double fiber = 0.0;
        for (int i = 0; i < x.size(); ++i) {
          const Vec q = x.samples.col(i);
          fiber += d.col(i).dot(b->metric_at(q) * b->fundamental_field_at(q));
        }
        x.phi = x.T - fiber / x.size();
        x.T = std::sqrt(loop_energy(*b, x) / (2.0 * k));
      }
      const LoopCotangent g = action_differential(*b, x);
      REQUIRE(std::abs(g.dT) < 1e-10);
      REQUIRE(x.T < std::sqrt(delta / (2.0 * k)));
      const auto m = guard_membership(*b, x, delta);
      REQUIRE(m.has_value());
      CHECK(*m == a);
    }
  }
}
