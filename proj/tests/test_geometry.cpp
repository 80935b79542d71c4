#include <doctest.h>

#include "generators.hpp"
#include "maggeo/geometry.hpp"

#include <cmath>

using namespace maggeo;
using maggeo::testing::Gen;

namespace {

const FlatTorusBundle torus1(1);
const HopfSphereBundle hopf;

std::vector<const BundleModel*> all_bundles() { return {&torus1, &hopf}; }

// Independent oracle: first-kind symbols from a differenced metric.
Christoffel fd_christoffel(const BundleModel& b, const Vec& q) {
  const double h = 1e-5;
  std::vector<Mat> dg;
  for (int a = 0; a < 3; ++a) {
    Vec qp = q, qm = q;
    qp(a) += h;
    qm(a) -= h;
    dg.push_back((b.metric_at(qp) - b.metric_at(qm)) / (2 * h));
  }
  const Mat ginv = b.metric_at(q).inverse();
  Christoffel out(3, Mat::Zero(3, 3));
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l)
          out[k](i, j) += 0.5 * ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
  return out;
}

}  // namespace

TEST_CASE("lorentz force on the flat torus") {
  const double s = 1.0 / kTwoPi;
  Vec q(2), v(2);
  q << 0.3, 1.7;
  v << 1.0, 0.0;
  const Vec y = lorentz_force(torus1.base(), q, v);
  CHECK(y(0) == doctest::Approx(0.0));
  CHECK(y(1) == doctest::Approx(-s));

  const FlatTorusBase flat(0);
  v << 0.4, -2.0;
  CHECK(lorentz_force(flat, q, v).norm() == 0.0);
}

TEST_CASE("lorentz force satisfies its defining identity") {
  Gen gen(11);
  for (const BundleModel* b : all_bundles()) {
    const ManifoldModel& base = b->base();
    for (int trial = 0; trial < 100; ++trial) {
      const Vec x = base.project_point(b->project(gen.point(*b)));
      const Mat tb = base.tangent_basis(x);
      const Vec u = tb * gen.gaussian(2);
      const Vec v = tb * gen.gaussian(2);
      const Mat g = base.metric_at(x);
      const Mat sg = base.two_form_at(x);
      CHECK(std::abs(u.dot(g * lorentz_force(base, x, v)) - u.dot(sg * v)) < 1e-10);
      // g-antisymmetry
      CHECK(std::abs(u.dot(g * lorentz_force(base, x, v)) + v.dot(g * lorentz_force(base, x, u))) <
            1e-10);
    }
  }
}

TEST_CASE("connection and fundamental field normalizations") {
  Gen gen(3);
  for (const BundleModel* b : all_bundles()) {
    for (int trial = 0; trial < 100; ++trial) {
      const Vec q = gen.point(*b);
      const Vec z = b->fundamental_field_at(q);
      const Mat g = b->metric_at(q);
      CHECK(b->connection_at(q).dot(z) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(z.dot(g * z) == doctest::Approx(1.0).epsilon(1e-14));
      const Vec h = gen.horizontal(*b, q);
      CHECK(std::abs(z.dot(g * h)) < 1e-12);
      CHECK(std::abs(b->connection_at(q).dot(h)) < 1e-12);
      // theta is the metric dual of Z
      CHECK((g * z - b->connection_at(q)).norm() < 1e-14);
    }
  }
}

TEST_CASE("projection is an isometry on horizontal vectors") {
  Gen gen(5);
  for (const BundleModel* b : all_bundles()) {
    for (int trial = 0; trial < 100; ++trial) {
      const Vec q = gen.point(*b);
      const Vec h = gen.horizontal(*b, q);
      const Vec dh = b->project_jacobian(q) * h;
      const Vec x = b->project(q);
      const double up = std::sqrt(h.dot(b->metric_at(q) * h));
      const double down = std::sqrt(dh.dot(b->base().metric_at(x) * dh));
      CHECK(std::abs(up - down) / up < 1e-8);
    }
  }
}

TEST_CASE("curvature of the connection is the pulled-back two-form") {
  Gen gen(7);
  for (const BundleModel* b : all_bundles()) {
    for (int trial = 0; trial < 100; ++trial) {
      const Vec q = gen.point(*b);
      const Vec u = gen.tangent(*b, q);
      const Vec v = gen.tangent(*b, q);
      const double dtheta = connection_exterior_derivative(*b, q, u, v, 1e-4);
      const Mat jac = b->project_jacobian(q);
      const Vec x = b->project(q);
      const double pulled = (jac * u).dot(b->base().two_form_at(x) * (jac * v));
      CHECK(std::abs(dtheta - pulled) < 1e-6);
    }
  }
}

TEST_CASE("d theta identity with the Levi-Civita derivative of Z") {
  Gen gen(13);
  for (const BundleModel* b : all_bundles()) {
    for (int trial = 0; trial < 100; ++trial) {
      const Vec q = gen.point(*b);
      const Vec u = gen.tangent(*b, q);
      const Vec v = gen.tangent(*b, q);
      CHECK(dalpha_identity_residual(*b, q, u, v) < 1e-6);
      CHECK(dalpha_identity_residual(*b, q, u, u) < 1e-6);
    }
  }
}

TEST_CASE("Christoffel symbols") {
  Gen gen(17);
  Vec x(2);
  x << 1.0, 2.0;
  for (const Mat& m : torus1.base().christoffel_at(x)) CHECK(m.norm() == 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    const Vec q = gen.point(torus1);
    const Christoffel exact = torus1.christoffel_at(q);
    const Christoffel fd = fd_christoffel(torus1, q);
    for (int k = 0; k < 3; ++k) {
      CHECK((exact[k] - exact[k].transpose()).norm() < 1e-15);
      CHECK((exact[k] - fd[k]).norm() < 1e-8);
    }
  }
}

TEST_CASE("holonomy around a chart rectangle equals the enclosed flux") {
  for (int n : {1, 2, 5}) {
    const FlatTorusBundle b(n);
    const double x0 = 0.4, x1 = 2.9, y0 = -0.7, y1 = 1.3;
    const int steps = 400;
    double hol = 0.0;
    auto edge = [&](double ax, double ay, double bx, double by) {
      for (int i = 0; i < steps; ++i) {
        const double t = (i + 0.5) / steps;
        Vec q(3);
        q << ax + t * (bx - ax), ay + t * (by - ay), 0.0;
        Vec d(3);
        d << (bx - ax) / steps, (by - ay) / steps, 0.0;
        hol += b.connection_at(q).dot(d);
      }
    };
    edge(x0, y0, x1, y0);
    edge(x1, y0, x1, y1);
    edge(x1, y1, x0, y1);
    edge(x0, y1, x0, y0);
    const double flux = b.field_strength() * (x1 - x0) * (y1 - y0);
    CHECK(hol == doctest::Approx(flux).epsilon(1e-12));
  }
}

TEST_CASE("deck transformations preserve the connection") {
  Gen gen(19);
  const FlatTorusBundle b(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec q = gen.point(b);
    const Winding w{gen.integer(-2, 2), gen.integer(-2, 2), gen.integer(-2, 2)};
    const Vec dq = b.deck(q, w, 1);
    CHECK((b.deck(dq, w, -1) - q).norm() < 1e-12);
    const Mat l = b.deck_linear(w, 1);
    const Vec v = gen.tangent(b, q);
    // D^* theta = theta and D^* g = g
    CHECK(std::abs(b.connection_at(dq).dot(l * v) - b.connection_at(q).dot(v)) < 1e-12);
    CHECK(std::abs((l * v).dot(b.metric_at(dq) * (l * v)) - v.dot(b.metric_at(q) * v)) < 1e-9);
  }
}

TEST_CASE("Hopf states stay on the unit sphere") {
  Gen gen(23);
  for (int trial = 0; trial < 50; ++trial) {
    Vec q = gen.gaussian(4) * 3.0;
    Vec p = gen.gaussian(4);
    hopf.project_phase(q, p);
    CHECK(std::abs(q.norm() - 1.0) < 1e-14);
    CHECK(std::abs(q.dot(p)) < 1e-14);
    CHECK(std::abs(hopf.fundamental_field_at(q).norm() - 1.0) < 1e-14);
    const Vec x = hopf.project(q);
    CHECK(x.norm() == doctest::Approx(0.5));
    CHECK((hopf.project(hopf.lift_point(x)) - x).norm() < 1e-12);
    const double a = gen.uniform(-3.0, 3.0);
    CHECK(hopf.fiber_angle(q, hopf.rotate_fiber(q, a)) == doctest::Approx(a));
  }
}

TEST_CASE("reduction map") {
  Gen gen(29);
  for (const BundleModel* b : all_bundles()) {
    for (int trial = 0; trial < 50; ++trial) {
      const Vec q = gen.point(*b);
      const double c = gen.uniform(-2.0, 2.0);

      // pure fiber momentum reduces to zero
      const ReducedState zero = reduction_map(*b, q, c * b->connection_at(q), c);
      CHECK(zero.covector.norm() < 1e-12);

      // unit base covector with c = 1 lifts to |p| = sqrt 2
      const Vec x = b->project(q);
      const Mat tb = b->base().tangent_basis(x);
      Vec vb = tb * gen.gaussian(2);
      vb /= std::sqrt(vb.dot(b->base().metric_at(x) * vb));
      const Vec h = b->horizontal_lift(q, vb);
      const Vec p = b->metric_at(q) * h + b->connection_at(q);
      const ReducedState red = reduction_map(*b, q, p, 1.0);
      CHECK(std::sqrt(red.covector.dot(red.velocity)) == doctest::Approx(1.0));
      CHECK(std::sqrt(p.dot(b->inverse_metric_at(q) * p)) == doctest::Approx(std::sqrt(2.0)));
      CHECK((red.velocity - vb).norm() < 1e-10);

      // H - Hbar o Pi_1 = 1/2 on A = 1
      Vec pr = b->metric_at(q) * gen.horizontal(*b, q) + b->connection_at(q);
      const ReducedState r2 = reduction_map(*b, q, pr, 1.0);
      CHECK(b->kinetic_energy(q, pr) - base_kinetic_energy(b->base(), r2) ==
            doctest::Approx(0.5));
    }
  }
  const Vec q = gen.point(torus1);
  CHECK_THROWS_AS(reduction_map(torus1, q, 2.0 * torus1.connection_at(q), 1.0), PreconditionError);
}

TEST_CASE("model catalog") {
  CHECK(make_bundle("torus", 2)->name() == "torus");
  CHECK(make_bundle("hopf")->ambient_dim() == 4);
  CHECK_THROWS_AS(make_bundle("klein"), PreconditionError);
}
