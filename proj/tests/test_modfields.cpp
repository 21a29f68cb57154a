#include "doctest.h"

#include <cmath>
#include <sstream>

#include "vptrap/modfields.hpp"

using namespace vptrap;

namespace {

GridField scalar_from(const GridSpec& sp, double t, double (*f)(const Vec&)) {
  GridField g = GridField::scalar(sp, t);
  for (std::size_t i = 0; i < sp.nodes(); ++i) g.data[i] = f(sp.position(i));
  return g;
}

double sup_abs(const GridField& g) {
  double m = 0.0;
  for (double v : g.data) m = std::max(m, std::abs(v));
  return m;
}

// Zero forces, potential q(t) x1^3 / 6 with q = e^{-2t}, one snapshot per step.
FieldHistory cubic_history(double t_end, double dt) {
  FieldHistory h;
  h.dim = 2;
  h.cells = 32;
  const GridSpec sp{2, 32, 8.0};
  const int steps = static_cast<int>(std::lround(t_end / dt));
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    h.forces.push_back(GridField::vector(sp, t));
    GridField phi = GridField::scalar(sp, t);
    for (std::size_t i = 0; i < sp.nodes(); ++i) {
      const double x1 = sp.position(i)[0];
      phi.data[i] = std::exp(-2.0 * t) * x1 * x1 * x1 / 6.0;
    }
    h.potentials.push_back(std::move(phi));
  }
  return h;
}

PhasePoint pp(double x1, double x2, double v1, double v2) {
  PhasePoint p;
  p.x = {x1, x2, 0.0};
  p.v = {v1, v2, 0.0};
  return p;
}

}  // namespace

TEST_CASE("source oracles on synthetic potentials") {
  const GridSpec sp{2, 64, 3.0};
  const auto fields = modified_base_fields();
  REQUIRE(fields.size() == 4);
  CHECK(fields[0].name() == "U1");
  CHECK(fields[3].name() == "R12");

  const GridField zero = GridField::scalar(sp, 0.7);
  for (const auto& z : fields)
    for (int k = 1; k <= 2; ++k) CHECK(sup_abs(modified_source(z, zero, 0.7, k, 1)) == 0.0);

  // |x|^4 is radial and within the exactness of the 4th-order stencils
  const GridField quartic = scalar_from(sp, 0.0, [](const Vec& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    return r2 * r2;
  });
  const double ref = sup_abs(modified_source(VectorFieldId::U(1, 2), quartic, 0.0, 1, 1));
  CHECK(ref > 1.0);
  for (int k = 1; k <= 2; ++k)
    CHECK(sup_abs(modified_source(VectorFieldId::R(1, 2, 2), quartic, 0.0, k, 1)) <= 1e-12 * ref);

  // L^x (|x|^2/4) = |x|^2/2 = 2 phi, so L phi - 2 phi vanishes
  const GridField q2 = scalar_from(sp, 0.0, [](const Vec& x) { return (x[0] * x[0] + x[1] * x[1]) / 4.0; });
  for (int k = 1; k <= 2; ++k) {
    CHECK(sup_abs(modified_source(VectorFieldId::Lf(2), q2, 1.0, k, 1)) <= 1e-12);
    // without the correction the source is -(mu/2) e^t x_k
    ModSourceOptions mut;
    mut.omit_c_term = true;
    const GridField s = modified_source(VectorFieldId::Lf(2), q2, 1.0, k, 1, mut);
    double xmax = 0.0;
    for (std::size_t i = 0; i < sp.nodes(); ++i) xmax = std::max(xmax, std::abs(sp.position(i)[k - 1]));
    CHECK(sup_abs(s) == doctest::Approx(0.5 * std::exp(1.0) * xmax).epsilon(1e-10));
  }

  // U1 on x1^2 / 2: -(mu/2) e^t d_k (e^t x1) = -(mu/2) e^{2t} delta_{k1}
  const GridField h1 = scalar_from(sp, 0.0, [](const Vec& x) { return 0.5 * x[0] * x[0]; });
  CHECK(sup_abs(modified_source(VectorFieldId::U(1, 2), h1, 0.5, 1, -1)) ==
        doctest::Approx(0.5 * std::exp(1.0)).epsilon(1e-12));
  CHECK(sup_abs(modified_source(VectorFieldId::U(1, 2), h1, 0.5, 2, -1)) <= 1e-12);

  CHECK_THROWS_AS(modified_source(VectorFieldId::S(1, 2), zero, 0.0, 1, 1), Error);
  CHECK_THROWS_AS(modified_source(VectorFieldId::U(1, 2), zero, 0.0, 3, 1), Error);
}

TEST_CASE("frozen cubic potential: coefficients and bundle gradients match quadrature oracles") {
  const double dt = 0.05, t_end = 2.0;
  const FieldHistory h = cubic_history(t_end, dt);
  SimConfig cfg;
  cfg.dt = dt;
  const std::vector<PhasePoint> starts{pp(0.3, -0.2, 0.1, 0.25), pp(-0.5, 0.4, 0.2, -0.1)};
  for (int mu : {1, -1}) {
    const ModCoefficients c = transport_coefficients(starts, h, mu, cfg);
    REQUIRE(c.times.size() == h.size());
    for (std::size_t p = 0; p < starts.size(); ++p) {
      const PhasePoint& s = starts[p];
      // sources along the exact linear flow, both linear or bilinear in X so that
      // stencils and interpolation are exact: U1,k=1: -(mu/2) X1; R12,k=1: (mu/2) e^{-t} X1 X2
      double u1 = 0, r1 = 0;
      auto X = [&](double t, int a) { return s.x[a] * std::cosh(t) + s.v[a] * std::sinh(t); };
      auto src_u1 = [&](double t) { return -0.5 * mu * X(t, 0); };
      auto src_r1 = [&](double t) { return 0.5 * mu * std::exp(-t) * X(t, 0) * X(t, 1); };
      for (std::size_t j = 1; j < c.times.size(); ++j) {
        const double a = c.times[j - 1], b = c.times[j], w = 0.5 * (b - a);
        u1 += w * (src_u1(a) + src_u1(b));
        r1 += w * (src_r1(a) + src_r1(b));
        CHECK(c.value(j, p, 0, 1) == doctest::Approx(u1).epsilon(1e-8));
        CHECK(std::abs(c.value(j, p, 1, 1)) <= 1e-12);
        CHECK(std::abs(c.value(j, p, 1, 2)) <= 1e-12);
        CHECK(c.value(j, p, 3, 1) == doctest::Approx(r1).epsilon(1e-8));
      }
      for (int k = 1; k <= 2; ++k) CHECK(c.value(0, p, 0, k) == 0.0);

      // U1,k=1 as a function of the current point: -(mu/2) sum_j w_j (x cosh(t - s_j) - v sinh(t - s_j))
      const std::size_t J = c.times.size() - 1;
      const double t = c.times[J];
      double ch = 0, sh = 0, ch0 = 0, sh0 = 0;
      for (std::size_t j = 1; j <= J; ++j) {
        const double a = c.times[j - 1], b = c.times[j], w = 0.5 * (b - a);
        ch += w * (std::cosh(t - a) + std::cosh(t - b));
        sh += w * (std::sinh(t - a) + std::sinh(t - b));
        ch0 += w * (std::cosh(a) + std::cosh(b));
        sh0 += w * (std::sinh(a) + std::sinh(b));
      }
      const std::size_t i = c.index(J, p, 0, 1);
      CHECK(c.grad_norms[i] == doctest::Approx(0.5 * std::hypot(ch, sh)).epsilon(1e-6));
      CHECK(c.grad_x_norms[i] == doctest::Approx(0.5 * ch).epsilon(1e-6));
      CHECK(c.grad_initial_norms[i] == doctest::Approx(0.5 * std::hypot(ch0, sh0)).epsilon(1e-6));
    }
  }
}

TEST_CASE("transport errors and serial/parallel agreement") {
  FieldHistory h = cubic_history(0.5, 0.05);
  SimConfig cfg;
  const std::vector<PhasePoint> starts{pp(0.1, 0.2, 0.3, 0.4), pp(0.0, 0.1, -0.2, 0.0), pp(0.5, 0.5, -0.5, -0.5)};
  TransportOptions serial, parallel;
  serial.exec = Exec::Serial;
  const ModCoefficients a = transport_coefficients(starts, h, 1, cfg, serial);
  const ModCoefficients b = transport_coefficients(starts, h, 1, cfg, parallel);
  CHECK(a.values == b.values);
  CHECK(a.grad_norms == b.grad_norms);

  TransportOptions nob;
  nob.bundle = false;
  CHECK(transport_coefficients(starts, h, 1, cfg, nob).grad_norms.empty());

  cfg.dt = 0.03;
  CHECK_THROWS_AS(transport_coefficients(starts, h, 1, cfg), Error);
  cfg.dt = 0.05;
  h.potentials.clear();
  CHECK_THROWS_AS(transport_coefficients(starts, h, 1, cfg), Error);
}

TEST_CASE("zero-mass run: all coefficients and margins vanish") {
  SimConfig cfg;
  cfg.n_particles = 200;
  cfg.t_max = 1.0;
  cfg.grid_cells = 32;
  RunOptions opt;
  opt.record_potential = true;
  opt.energies = false;
  const SimulationResult r = run_simulation(cfg, make_initial(InitialKind::Gaussian, 2, 0.0, 0.5, 0.5), opt);
  std::vector<PhasePoint> starts(r.ensemble.origins.begin(), r.ensemble.origins.begin() + 20);
  const ModCoefficients c = transport_coefficients(starts, r.history, cfg.mu, cfg);
  for (double v : c.values) CHECK(v == 0.0);
  const BootstrapMargins m = bootstrap_check(c, r.report, cfg.eps);
  CHECK(m.b2 == 0.0);
  CHECK(m.b3 == 0.0);
  CHECK(m.b4 == 0.0);
  CHECK(m.pass());
}

TEST_CASE("small run: continuity, linear growth, margins") {
  SimConfig cfg;
  cfg.n_particles = 4000;
  cfg.t_max = 2.0;
  cfg.grid_cells = 32;
  RunOptions opt;
  opt.record_potential = true;
  opt.energies = false;
  const SimulationResult r = run_simulation(cfg, reference_initial(cfg), opt);
  std::vector<PhasePoint> starts(r.ensemble.origins.begin(), r.ensemble.origins.begin() + 100);
  const ModCoefficients c = transport_coefficients(starts, r.history, cfg.mu, cfg);

  // no jump exceeds the largest source magnitude times the step
  const auto fields = modified_base_fields();
  for (std::size_t f = 0; f < fields.size(); ++f)
    for (int k = 1; k <= 2; ++k) {
      double smax = 0.0;
      for (const GridField& phi : r.history.potentials)
        smax = std::max(smax, sup_abs(modified_source(fields[f], phi, phi.time, k, cfg.mu)));
      for (std::size_t j = 1; j < c.times.size(); ++j)
        for (std::size_t p = 0; p < c.particles; ++p) {
          const double jump = std::abs(c.value(j, p, f, k) - c.value(j - 1, p, f, k));
          CHECK(std::isfinite(c.value(j, p, f, k)));
          CHECK(jump <= smax * (c.times[j] - c.times[j - 1]) * (1.0 + 1e-12));
        }
    }

  const BootstrapMargins m = bootstrap_check(c, r.report, cfg.eps);
  CHECK(m.b2 > 0.0);
  CHECK(m.b2 < 1.0);
  CHECK(m.b4 < 1.0);
  // B4 reuses the report series as is
  double b4 = 0.0;
  for (std::size_t k = 0; k < r.report.times.size(); ++k)
    b4 = std::max(b4, r.report.sup_force[k] * std::exp(r.report.times[k]) / std::sqrt(cfg.eps));
  CHECK(m.b4 == b4);
  for (double s : coefficient_growth_slopes(c)) CHECK(s <= 1.5 * std::sqrt(cfg.eps));
  CHECK(coefficient_growth_slopes(c)[0] > 0.0);
}

TEST_CASE("t^2 coefficient series is rejected") {
  const double eps = 1e-2;
  ModCoefficients c;
  c.fields = modified_base_fields();
  c.particles = 1;
  for (int j = 0; j <= 100; ++j) c.times.push_back(0.05 * j);
  c.values.assign(c.times.size() * 8, 0.0);
  for (std::size_t j = 0; j < c.times.size(); ++j) c.values[c.index(j, 0, 0, 1)] = std::sqrt(eps) * c.times[j] * c.times[j];
  DiagnosticsReport rep;
  const BootstrapMargins m = bootstrap_check(c, rep, eps);
  CHECK(m.b2 == doctest::Approx(25.0 / 6.0));
  CHECK_FALSE(m.pass());
  CHECK(coefficient_growth_slopes(c)[0] > 1.5 * std::sqrt(eps));
}

TEST_CASE("coefficients csv") {
  const FieldHistory h = cubic_history(0.1, 0.05);
  SimConfig cfg;
  const ModCoefficients c = transport_coefficients({pp(0.1, 0.1, 0.0, 0.0)}, h, 1, cfg);
  std::ostringstream os;
  write_coefficients_csv(os, c);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,particle_id,base_field,k,phi_value");
  std::getline(is, line);
  CHECK(line.rfind("0,0,U1,1,", 0) == 0);
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3 * 4 * 2);
}
