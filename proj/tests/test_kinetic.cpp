#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "vptrap/kinetic.hpp"

using namespace vptrap;

namespace {

constexpr double kPi = std::numbers::pi;

SimConfig small_config(int dim = 2) {
  SimConfig c;
  c.dim = dim;
  c.n_particles = 4000;
  c.t_max = 1.0;
  c.grid_cells = dim == 2 ? 64 : 24;
  return c;
}

// Isotropic gaussian density of mass m and per-axis variance var.
double gaussian(const Vec& x, int n, double m, double var) {
  double r2 = 0.0;
  for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
  return m * std::exp(-0.5 * r2 / var) / std::pow(2.0 * kPi * var, n / 2.0);
}

}  // namespace

TEST_CASE("sample_initial: weights, determinism, moments") {
  const InitialData f0 = make_initial(InitialKind::Gaussian, 2, 0.01, 0.5, 0.5);
  const std::int64_t N = 20000;
  const ParticleEnsemble a = sample_initial(f0, N, 42);
  const ParticleEnsemble b = sample_initial(f0, N, 42);
  CHECK(a.total_weight() == doctest::Approx(0.01).epsilon(1e-13));
  CHECK(a.weights.front() == 0.01 / N);
  CHECK(a.points == b.points);
  CHECK(a.tangents.size() == a.size());
  CHECK(a.origins == a.points);
  CHECK_FALSE(sample_initial(f0, N, 43).points == a.points);

  // mean 0, covariance 0.25 I on each block
  std::array<double, 4> mean{}, var{};
  double cross = 0.0;
  for (const auto& p : a.points) {
    const double z[] = {p.x[0], p.x[1], p.v[0], p.v[1]};
    for (int k = 0; k < 4; ++k) {
      mean[k] += z[k] / N;
      var[k] += z[k] * z[k] / N;
    }
    cross += p.x[0] * p.v[0] / N;
  }
  const double tol = 5.0 / std::sqrt(static_cast<double>(N));
  for (int k = 0; k < 4; ++k) {
    CHECK(std::abs(mean[k]) <= tol * 0.5);
    CHECK(std::abs(var[k] - 0.25) <= tol * 0.25 * std::sqrt(2.0));
  }
  CHECK(std::abs(cross) <= tol * 0.25);
  CHECK_THROWS_AS(sample_initial(f0, 0, 1), ConfigError);
}

TEST_CASE("sample_initial: bump support") {
  const InitialData f0 = make_initial(InitialKind::Bump, 3, 1.0, 0.4, 0.6);
  const ParticleEnsemble e = sample_initial(f0, 5000, 9, false);
  CHECK_FALSE(e.has_tangents());
  for (const auto& p : e.points) {
    double u = 0.0;
    for (int a = 0; a < 3; ++a) u += std::pow(p.x[a] / 0.4, 2) + std::pow(p.v[a] / 0.6, 2);
    CHECK(u < 9.0);
  }
}

TEST_CASE("deposit: single particle, empty ensemble, lost mass") {
  SimConfig c = small_config();
  ParticleEnsemble e;
  e.dim = 2;
  GridField rho = deposit_density(e, 0.0, c);
  CHECK(rho.sup_magnitude() == 0.0);

  e.points = {PhasePoint::zero(2)};
  e.points[0].x = {0.31, -0.52, 0.0};
  e.origins = e.points;
  e.weights = {0.7};
  DepositStats st;
  rho = deposit_density(e, 0.3, c, &st);
  CHECK(rho.integral() == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(st.lost_fraction == doctest::Approx(0.0));
  CHECK(rho.time == 0.3);

  // a particle two kernel widths inside the edge loses a little of its
  // kernel; one on the edge loses about half, which is an error
  const double cell = grid_at(0.0, c).cell_width();
  e.points[0].x = {grid_scale(0.0, c) - 2.4 * cell, 0.0, 0.0};
  rho = deposit_density(e, 0.0, c, &st);
  CHECK(st.lost_fraction > 1e-3);
  CHECK(st.lost_fraction < 0.05);
  CHECK(rho.integral() == doctest::Approx(0.7 * (1.0 - st.lost_fraction)).epsilon(1e-12));
  e.points[0].x = {grid_scale(0.0, c), 0.0, 0.0};
  CHECK_THROWS_AS(deposit_density(e, 0.0, c), NumericalError);
}

TEST_CASE("deposit: serial and parallel agree") {
  const SimConfig c = small_config(3);
  const ParticleEnsemble e = sample_initial(reference_initial(c), 3000, 5, false);
  const GridField a = deposit_density(e, 0.0, c, nullptr, Exec::Serial);
  const GridField b = deposit_density(e, 0.0, c, nullptr, Exec::Parallel);
  double worst = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) worst = std::max(worst, std::abs(a.data[k] - b.data[k]));
  CHECK(worst <= 1e-12 * a.sup_magnitude());
}

TEST_CASE("deposit of a linearly transported gaussian ensemble") {
  // At time t the density of the linear solution is an isotropic gaussian
  // with variance sigma^2 cosh 2t; the deposit expectation adds the kernel
  // variance (1.2 cells)^2.
  SimConfig c = small_config();
  c.n_particles = 20000;
  const InitialData f0 = reference_initial(c);
  ParticleEnsemble e = sample_initial(f0, c.n_particles, 17, false);
  const double t = 1.5;
  for (auto& p : e.points) p = linear_flow(t, p);
  const GridField rho = deposit_density(e, t, c);
  const GridSpec& sp = rho.spec;
  const double var = 0.25 * std::cosh(2.0 * t);
  const double kvar = std::pow(1.2 * sp.cell_width(), 2);

  // the analytic density also matches the linear module's quadrature
  const GridField lin = linear_density_on_grid(f0, t, c);
  double lin_err = 0.0;
  for (std::size_t k = 0; k < sp.nodes(); ++k)
    lin_err = std::max(lin_err, std::abs(lin.data[k] - gaussian(sp.position(k), 2, c.eps, var)));
  CHECK(lin_err <= 1e-6 * lin.sup_magnitude());

  // per-node Monte Carlo standard error from the individual contributions
  std::vector<double> s2(sp.nodes(), 0.0);
  for (const auto& p : e.points) {
    ParticleEnsemble one;
    one.dim = 2;
    one.points = {p};
    one.weights = {e.weights[0]};
    const GridField g = deposit_density(one, t, c, nullptr, Exec::Serial);
    for (std::size_t k = 0; k < sp.nodes(); ++k) s2[k] += g.data[k] * g.data[k];
  }
  const double N = static_cast<double>(e.size());
  std::size_t within = 0, counted = 0;
  double worst = 0.0;
  const double peak = gaussian({0.0, 0.0, 0.0}, 2, c.eps, var + kvar);
  for (std::size_t k = 0; k < sp.nodes(); ++k) {
    // nodes in the bulk, where many particles contribute
    const double want = gaussian(sp.position(k), 2, c.eps, var + kvar);
    if (want < 0.05 * peak) continue;
    const double se = std::sqrt(std::max(0.0, s2[k] - rho.data[k] * rho.data[k] / N));
    const double dev = std::abs(rho.data[k] - want) / se;
    ++counted;
    within += dev <= 3.0;
    worst = std::max(worst, dev);
  }
  MESSAGE("nodes within 3 SE: ", within, " of ", counted, ", worst ", worst, " SE");
  CHECK(static_cast<double>(within) >= 0.99 * static_cast<double>(counted));
  CHECK(worst <= 5.0);
}

TEST_CASE("weighted sup density") {
  const GridSpec sp{2, 256, 4.0};
  CHECK(weighted_sup_density(GridField::scalar(sp), 1.0, 2) == 0.0);
  GridField rho = GridField::scalar(sp);
  const double var = 0.25;
  for (std::size_t k = 0; k < sp.nodes(); ++k) rho.data[k] = gaussian(sp.position(k), 2, 1.0, var);
  // maximise (1 + r)^2 g(r): 2 / (1 + r) = r / var, r (1 + r) = 2 var
  const double r = 0.5 * (-1.0 + std::sqrt(1.0 + 8.0 * var));
  const double want = std::pow(1.0 + r, 2) * std::exp(-0.5 * r * r / var) / (2.0 * kPi * var);
  CHECK(weighted_sup_density(rho, 0.0, 2) == doctest::Approx(want).epsilon(1e-3));
  CHECK(weighted_sup_density(rho, 0.0, 2) <= want);
}

TEST_CASE("energy surrogates at t = 0 match closed forms") {
  // isotropic gaussian, width s, mass M: ||U_i f|| = ||S_i f|| = 2M / (s sqrt(pi)),
  // ||L f|| = 2n M, ||R_ij f|| = 0
  for (int n : {2, 3}) {
    const double M = 0.01, s = 0.5;
    const InitialData f0 = make_initial(InitialKind::Gaussian, n, M, s, s);
    const ParticleEnsemble e = sample_initial(f0, 20000, 3 + n);
    const EnergyReport r = estimate_energy_first_order(e, f0, 0.0);
    CHECK(r.skipped == 0);
    for (const auto& [name, est] : r.fields) {
      double want = 0.0;
      if (name[0] == 'U' || name[0] == 'S') want = 2.0 * M / (s * std::sqrt(kPi));
      if (name == "L") want = 2.0 * n * M;
      CHECK_MESSAGE(std::abs(est.value - want) <= 3.0 * est.stderr_ + 1e-15, name);
    }
  }
}

TEST_CASE("zero-mass run is pure linear transport") {
  SimConfig c = small_config();
  c.n_particles = 500;
  const InitialData f0 = make_initial(InitialKind::Gaussian, 2, 0.0, 0.5, 0.5);
  const SimulationResult r = run_simulation(c, f0);
  for (const auto& g : r.history.forces) CHECK(g.sup_magnitude() == 0.0);
  for (std::size_t p = 0; p < r.ensemble.size(); ++p) {
    const PhasePoint want = linear_flow(c.t_max, r.ensemble.origins[p]);
    const PhasePoint& got = r.ensemble.points[p];
    for (int a = 0; a < 2; ++a) {
      CHECK(std::abs(got.x[a] - want.x[a]) <= 1e-12 * want.norm());
      CHECK(std::abs(got.v[a] - want.v[a]) <= 1e-12 * want.norm());
    }
  }
}

TEST_CASE("small interacting run: history, mass, mu symmetry, energies") {
  SimConfig c = small_config();
  c.snapshot_stride = 2;
  RunOptions opt;
  opt.record_potential = true;
  const SimulationResult r = run_simulation(c, reference_initial(c), opt);
  // 20 steps, snapshots at even steps
  CHECK(r.history.size() == 11);
  CHECK(r.history.has_potentials());
  CHECK(r.report.times.back() == 1.0);
  CHECK(r.report.energy_names.size() == 6);  // U1 U2 S1 S2 L R12
  for (double m : r.report.mass) CHECK(std::abs(m - c.eps) <= 1e-12 * c.eps);
  CHECK(r.report.sup_force.front() > 0.0);
  for (std::size_t k = 0; k < r.history.size(); ++k) {
    CHECK(r.history.forces[k].spec.scale == doctest::Approx(grid_scale(r.history.time(k), c)).epsilon(1e-14));
    CHECK(r.history.forces[k].sup_magnitude() == r.report.sup_force[k]);
  }
  const auto total = r.report.energy_total();
  for (double v : total) CHECK(v <= 2.0 * total.front());

  SimConfig flipped = c;
  flipped.mu = -1;
  flipped.t_max = 0.05;
  const SimulationResult q = run_simulation(flipped, reference_initial(c), opt);
  // the t = 0 force depends only on the sampled density, not on mu
  CHECK(q.history.forces[0].data == r.history.forces[0].data);
}

TEST_CASE("diagnostics CSV layout") {
  DiagnosticsReport r;
  r.times = {0.0, 0.5};
  r.sup_force = {1.0, 0.5};
  r.weighted_sup_rho = {2.0, 2.0};
  r.mass = {0.01, 0.01};
  r.energy_names = {"U1", "L"};
  r.energies = {{1.0, 1.0}, {0.1, 0.1}};
  std::ostringstream os;
  write_diagnostics_csv(os, r);
  const std::string s = os.str();
  CHECK(s.substr(0, s.find('\n')) == "t,sup_force,weighted_sup_rho,mass,E_U1,E_L");
  CHECK(s.find("0.01,") != std::string::npos);
  CHECK(s.find("0.010000000000000000") == std::string::npos);  // 17 significant digits, not fixed
}

TEST_CASE("history file round trip and sampler") {
  FieldHistory h;
  h.dim = 2;
  h.cells = 16;
  for (int k = 0; k < 3; ++k) {
    GridField g = GridField::vector(GridSpec{2, 16, 2.0 * std::exp(0.5 * k)}, 0.5 * k);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = (k + 1) * 0.001 * static_cast<double>(i % 17);
    h.forces.push_back(g);
  }
  std::stringstream ss;
  write_history(ss, h);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 8) == "VPTRAP01");
  CHECK(bytes.size() == 8 + 4 + 4 + 8 + 3 * (16 + 16 * 16 * 2 * 8));
  const FieldHistory back = read_history(ss);
  CHECK(back.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(back.forces[k].data == h.forces[k].data);
    CHECK(back.forces[k].spec.scale == h.forces[k].spec.scale);
    CHECK(back.time(k) == h.time(k));
  }
  std::stringstream bad("NOTAFILE........");
  CHECK_THROWS_AS(read_history(bad), Error);
  std::stringstream cut(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_history(cut), Error);

  const HistoryForce F(h);
  const Vec x{0.3, -0.2, 0.0};
  CHECK(F.force(0.5, x) == interpolate_vector(h.forces[1], x));
  const Vec fa = interpolate_vector(h.forces[0], x), fb = interpolate_vector(h.forces[1], x);
  CHECK(F.force(0.125, x)[0] == doctest::Approx(0.75 * fa[0] + 0.25 * fb[0]).epsilon(1e-14));
  CHECK(F.force(1.01, x)[0] == 0.0);
  CHECK(F.force(0.5, {50.0, 0.0, 0.0})[0] == 0.0);
}

TEST_CASE("decay_fit") {
  DecaySeries s;
  for (int k = 0; k <= 20; ++k) s.push_back(0.25 * k, 3.0 * std::exp(-2.0 * 0.25 * k));
  const DecayFit f = decay_fit(s, 1.0, 4.0);
  CHECK(f.slope == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.points == 13);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 0.01);
  DecaySeries noisy;
  for (int k = 0; k <= 100; ++k) noisy.push_back(0.05 * k, std::exp(-2.0 * 0.05 * k) * (1.0 + nd(rng)));
  const DecayFit g = decay_fit(noisy, 0.0, 5.0);
  CHECK(std::abs(g.slope + 2.0) <= 0.05);
  CHECK(g.stderr_ > 0.0);

  CHECK_THROWS_AS(decay_fit(s, 1.0, 1.5), Error);
  DecaySeries z = s;
  z.values[6] = 0.0;
  CHECK_THROWS_AS(decay_fit(z, 1.0, 4.0), Error);
}
