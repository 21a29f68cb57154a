#include "doctest.h"

#include <cmath>
#include <limits>

#include "vptrap/dynamics.hpp"
#include "vptrap/linear.hpp"

using namespace vptrap;

namespace {

// eps e^{-t} grad of a unit gaussian bump centred at c: smooth, decaying,
// with a closed-form Jacobian for checking evaluate_force.
class BumpForce final : public ForceSampler {
 public:
  BumpForce(int dim, double eps, Vec c) : dim_(dim), eps_(eps), c_(c) {}
  int dim() const override { return dim_; }
  Vec force(double t, const Vec& x) const override {
    const double g = bump(t, x);
    Vec f{};
    for (int a = 0; a < dim_; ++a) f[a] = -(x[a] - c_[a]) * g;
    return f;
  }
  double jac(double t, const Vec& x, int a, int b) const {
    const double g = bump(t, x);
    return (a == b ? -g : 0.0) + (x[a] - c_[a]) * (x[b] - c_[b]) * g;
  }

 private:
  double bump(double t, const Vec& x) const {
    double r2 = 0.0;
    for (int a = 0; a < dim_; ++a) r2 += (x[a] - c_[a]) * (x[a] - c_[a]);
    return eps_ * std::exp(-t) * std::exp(-0.5 * r2);
  }
  int dim_;
  double eps_;
  Vec c_;
};

class NanForce final : public ForceSampler {
 public:
  int dim() const override { return 2; }
  Vec force(double t, const Vec&) const override {
    return {t > 0.1 ? std::numeric_limits<double>::quiet_NaN() : 0.0, 0.0, 0.0};
  }
};

PhasePoint pp(double x1, double x2, double v1, double v2) {
  const double x[] = {x1, x2}, v[] = {v1, v2};
  return PhasePoint::make(x, v);
}

SimConfig config(double dt, int mu = 1) {
  SimConfig c;
  c.dt = dt;
  c.mu = mu;
  return c;
}

double dist(const PhasePoint& a, const PhasePoint& b) {
  double s = 0.0;
  for (int k = 0; k < a.dim; ++k) s += std::pow(a.x[k] - b.x[k], 2) + std::pow(a.v[k] - b.v[k], 2);
  return std::sqrt(s);
}

PhasePoint end_point(const PhasePoint& p0, double t1, double dt, const ForceSampler& F, int mu = 1) {
  return walk_characteristic(p0, 0.0, t1, dt, mu, F, false, {}).p;
}

}  // namespace

TEST_CASE("zero field: one step is the exact linear flow") {
  const ZeroForce F(2);
  const PhasePoint p = pp(0.3, -1.2, 0.7, 0.4);
  for (double h : {0.05, 0.01, 0.0333}) {
    PhasePoint q = p;
    strang_step(q, nullptr, 0.0, h, 1, F);
    CHECK(dist(q, linear_flow(h, p)) <= 1e-15 * p.norm());
  }
}

TEST_CASE("zero field: integration to t = 5 reproduces the linear flow") {
  const ZeroForce F(3);
  const double x[] = {0.2, -0.4, 1.0}, v[] = {-0.3, 0.1, 0.5};
  const PhasePoint p = PhasePoint::make(x, v);
  for (double t : {1.0, 2.5, 5.0}) {
    const PhasePoint q = end_point(p, t, 0.05, F);
    const PhasePoint want = linear_flow(t, p);
    CHECK(dist(q, want) <= 1e-12 * want.norm());
    // X + V = e^t (x + v) exactly up to round-off
    for (int a = 0; a < 3; ++a)
      CHECK(q.x[a] + q.v[a] == doctest::Approx(std::exp(t) * (x[a] + v[a])).epsilon(1e-12));
    // reversibility
    CHECK(dist(linear_flow(-t, q), p) <= 1e-10);
  }
}

TEST_CASE("zero field: the stable line contracts like e^{-t}") {
  const ZeroForce F(2);
  const PhasePoint p = pp(1.0, -0.5, -1.0, 0.5);
  const Trajectory tr = integrate_characteristic(p, 0.0, 5.0, config(0.05), F, false);
  for (std::size_t k = 0; k < tr.times.size(); ++k)
    CHECK(std::abs(tr.points[k].norm() - std::exp(-tr.times[k]) * p.norm()) <= 1e-10);
}

TEST_CASE("constant force: one-step error is third order") {
  const double f0 = 0.3;
  const ConstantForce F(2, {f0, 0.0, 0.0});
  const PhasePoint p = pp(0.4, 0.0, -0.2, 0.0);
  auto err = [&](double h, int mu) {
    PhasePoint q = p;
    strang_step(q, nullptr, 0.0, h, mu, F);
    // variation of constants with constant integrand
    const double X = p.x[0] * std::cosh(h) + p.v[0] * std::sinh(h) - mu * f0 * (std::cosh(h) - 1.0);
    const double V = p.x[0] * std::sinh(h) + p.v[0] * std::cosh(h) - mu * f0 * std::sinh(h);
    return std::hypot(q.x[0] - X, q.v[0] - V);
  };
  for (int mu : {1, -1}) {
    const double r = err(0.04, mu) / err(0.02, mu);
    CHECK(r == doctest::Approx(8.0).epsilon(0.05));
  }
}

TEST_CASE("global order two by Richardson self-convergence") {
  const BumpForce F(2, 0.5, {0.3, -0.2, 0.0});
  const PhasePoint p = pp(0.5, 0.1, -0.6, 0.2);
  const double T = 2.0;
  const PhasePoint ref = end_point(p, T, 0.05 / 64, F);
  const double e1 = dist(end_point(p, T, 0.05, F), ref);
  const double e2 = dist(end_point(p, T, 0.025, F), ref);
  const double e3 = dist(end_point(p, T, 0.0125, F), ref);
  MESSAGE("ratios ", e1 / e2, " ", e2 / e3);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
  CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("force Jacobian by central differences") {
  const BumpForce F(3, 0.2, {0.1, 0.2, -0.3});
  const Vec x{0.4, -0.7, 0.2};
  const ForceEval e = evaluate_force(F, 0.5, x, true);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(std::abs(e.jac(a, b) - F.jac(0.5, x, a, b)) <= 1e-9);
}

TEST_CASE("tangent maps: unit determinant, growth bound, FD agreement") {
  for (int n : {2, 3}) {
    const double eps = 1e-2;
    const BumpForce F(n, eps, {0.2, -0.1, 0.1});
    const double x[] = {0.3, -0.2, 0.1}, v[] = {-0.1, 0.4, 0.2};
    const PhasePoint p = PhasePoint::make(std::span(x, n), std::span(v, n));
    const Trajectory tr = integrate_characteristic(p, 0.0, 5.0, config(0.05), F, true);
    double worst_det = 0.0, worst_growth = 0.0;
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      worst_det = std::max(worst_det, std::abs(tr.tangents[k].determinant() - 1.0));
      worst_growth = std::max(worst_growth, tr.tangents[k].cwiseAbs().maxCoeff() /
                                                ((1.0 + 2.0 * std::sqrt(eps)) * std::exp(tr.times[k])));
    }
    CHECK(worst_det <= 1e-8);
    CHECK(worst_growth <= 1.0);

    // 4n perturbed characteristics, offset 1e-6, compared at t = 2
    const double T = 2.0, d = 1e-6;
    const TangentMap J = walk_characteristic(p, 0.0, T, 0.05, 1, F, true, {}).J;
    TangentMap fd(2 * n, 2 * n);
    for (int b = 0; b < 2 * n; ++b) {
      PhasePoint pp_ = p, pm = p;
      (b < n ? pp_.x[b] : pp_.v[b - n]) += d;
      (b < n ? pm.x[b] : pm.v[b - n]) -= d;
      const PhasePoint qp = end_point(pp_, T, 0.05, F), qm = end_point(pm, T, 0.05, F);
      for (int a = 0; a < 2 * n; ++a) {
        const double up = a < n ? qp.x[a] : qp.v[a - n], um = a < n ? qm.x[a] : qm.v[a - n];
        fd(a, b) = (up - um) / (2.0 * d);
      }
    }
    CHECK((fd - J).norm() <= 1e-4 * J.norm());
  }
}

TEST_CASE("Duhamel identities") {
  SUBCASE("zero field") {
    const ZeroForce F(2);
    const Trajectory tr = integrate_characteristic(pp(0.3, 0.2, -0.1, 0.5), 0.0, 5.0, config(0.05), F, false);
    const DuhamelResidual r = duhamel_residual(tr, 1, F);
    // X - V cancels between components of size e^t, then gets scaled by e^t
    for (int a = 0; a < 2; ++a) {
      CHECK(r.unstable[a] <= 1e-13);
      CHECK(r.stable[a] <= 1e-16 * std::exp(10.0) * 10.0);
    }
  }
  SUBCASE("constant force, stride 4 samples") {
    const ConstantForce F(2, {0.2, -0.1, 0.0});
    SimConfig c = config(0.05);
    c.snapshot_stride = 4;
    const Trajectory tr = integrate_characteristic(pp(0.3, 0.2, -0.1, 0.5), 0.0, 3.0, c, F, false);
    const DuhamelResidual r = duhamel_residual(tr, 1, F);
    c.snapshot_stride = 2;
    const DuhamelResidual r2 = duhamel_residual(integrate_characteristic(pp(0.3, 0.2, -0.1, 0.5), 0.0, 3.0, c, F, false), 1, F);
    // trapezoid error bound h^2/12 int |d^2/dt^2 (e^{-+t} F)| with h = 0.2
    const double h = 0.2, fs[] = {0.2, 0.1};
    for (int a = 0; a < 2; ++a) {
      CHECK(r.unstable[a] <= 1.1 * h * h / 12.0 * fs[a]);
      CHECK(r.stable[a] <= 1.1 * h * h / 12.0 * fs[a] * (std::exp(3.0) - 1.0));
      // the scheme itself is the trapezoid rule at dt = 0.05, so the residual
      // scales like H^2 - dt^2: (16 - 1) / (4 - 1) between H = 4 dt and 2 dt
      CHECK(r.stable[a] / r2.stable[a] == doctest::Approx(5.0).epsilon(0.01));
    }
  }
  SUBCASE("small nonlinear field, every step sampled") {
    const BumpForce F(2, 1e-2, {0.1, 0.0, 0.0});
    for (int mu : {1, -1}) {
      const Trajectory tr = integrate_characteristic(pp(0.5, -0.3, -0.45, 0.2), 0.0, 5.0, config(0.05, mu), F, false);
      const DuhamelResidual r = duhamel_residual(tr, mu, F);
      for (int a = 0; a < 2; ++a) {
        CHECK(r.unstable[a] <= 1e-5);
        CHECK(r.stable[a] <= 1e-5);
      }
    }
  }
}

TEST_CASE("integrate_characteristic sampling and time base") {
  const ZeroForce F(2);
  SimConfig c = config(0.05);
  c.snapshot_stride = 3;
  const Trajectory tr = integrate_characteristic(pp(0.1, 0.0, 0.0, 0.0), 0.0, 1.03, c, F, true);
  // 21 steps: nodes 0, 3, ..., 21 plus nothing extra since step 21 lands on t1
  CHECK(tr.times.front() == 0.0);
  CHECK(tr.times.back() == 1.03);
  CHECK(tr.times.size() == 8);
  CHECK(tr.tangents.size() == tr.times.size());
  CHECK(tr.times[1] == doctest::Approx(0.15).epsilon(1e-15));
}

TEST_CASE("step errors") {
  const NanForce F;
  PhasePoint p = pp(0.1, 0.0, 0.0, 0.0);
  CHECK_THROWS_AS(strang_step(p, nullptr, 0.0, 0.06, 1, ZeroForce(2)), Error);
  try {
    walk_characteristic(p, 0.0, 1.0, 0.05, 1, F, false, {});
    FAIL("expected a non-finite force error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("t=0.15") != std::string::npos);
  }
}

TEST_CASE("grid interpolation") {
  const GridSpec spec{2, 16, 2.0};
  GridField g = GridField::vector(spec);
  for (std::size_t k = 0; k < spec.nodes(); ++k) {
    const Vec x = spec.position(k);
    g.at(k, 0) = 1.0 + 2.0 * x[0] - x[1];
    g.at(k, 1) = x[0] * x[1];
  }
  const GridForce F(g);
  const Vec f = F.force(0.0, {0.33, -0.71, 0.0});
  CHECK(f[0] == doctest::Approx(1.0 + 0.66 + 0.71).epsilon(1e-14));
  // bilinear is exact on x1 x2 inside a cell only at nodes; check a node
  const Vec node = spec.position(spec.ravel({5, 9, 0}));
  CHECK(F.force(0.0, node)[1] == doctest::Approx(node[0] * node[1]).epsilon(1e-14));
  CHECK(F.force(0.0, {2.1, 0.0, 0.0})[0] == 0.0);
  CHECK(F.length_scale(0.0) == 2.0);
}

TEST_CASE("shifted sampler") {
  const BumpForce F(2, 1.0, {0.0, 0.0, 0.0});
  const ShiftedForce S(F, 1.0);
  const Vec x{0.5, 0.5, 0.0};
  CHECK(S.force(0.5, x)[0] == F.force(1.5, x)[0]);
}
