// vptrap command-line driver. Exit codes: 0 all checks passed, 1 a check
// failed, 2 usage or configuration error, 3 runtime or numerical error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vptrap/acceptance.hpp"
#include "vptrap/history.hpp"
#include "vptrap/kinetic.hpp"
#include "vptrap/linear.hpp"
#include "vptrap/modfields.hpp"
#include "vptrap/parallel.hpp"
#include "vptrap/poisson.hpp"
#include "vptrap/trapped.hpp"

namespace fs = std::filesystem;
using namespace vptrap;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string out = ".";
  std::vector<std::string> overrides;
  int workers = 0;
  bool force = false;

  SimConfig load() const {
    RawConfig raw = config.empty() ? to_raw(SimConfig{}) : read_config_file(config);
    for (const std::string& kv : overrides) apply_override(raw, kv);
    return validate_config(raw);
  }

  // Creates the output directory; refuses to overwrite without --force.
  fs::path output(const std::string& name) const {
    fs::create_directories(out);
    const fs::path p = fs::path(out) / name;
    if (fs::exists(p) && !force) throw UsageError(p.string() + " exists; pass --force to overwrite");
    return p;
  }

  std::ofstream open(const std::string& name) const {
    const fs::path p = output(name);
    std::ofstream os(p);
    if (!os) throw Error("cannot write " + p.string());
    return os;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "config file (key = value lines)")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--override", c.overrides, "key=value, applied after the config file (repeatable)");
  sub->add_option("--workers", c.workers, "OpenMP threads; 1 gives bitwise reproducible output")
      ->check(CLI::NonNegativeNumber);
  sub->add_flag("--force", c.force, "overwrite existing output files");
}

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

int report(const std::string& label, bool ok, const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << label << " -- " << detail << '\n';
  return ok ? 0 : 1;
}

// ------------------------------------------------------------ subcommands

int cmd_linear_decay(const Common& c) {
  const SimConfig cfg = c.load();
  const InitialData f0 = reference_initial(cfg);
  VelocityQuadrature q;
  if (cfg.dim == 3) q.nodes_per_axis = 16;
  DecaySeries sup;
  std::ofstream os = c.open("linear_decay.csv");
  os << "t,sup_rho,weighted_sup_rho\n" << std::setprecision(17);
  const int steps = static_cast<int>(std::round(cfg.t_max / 0.25));
  for (int k = 0; k <= steps; ++k) {
    const double t = std::min(cfg.t_max, 0.25 * k);
    const GridField rho = linear_density_on_grid(f0, t, cfg, q);
    sup.push_back(t, rho.sup_magnitude());
    os << t << ',' << rho.sup_magnitude() << ',' << weighted_sup_density(rho, t, cfg.dim) << '\n';
  }
  const double tb = std::min(4.0, cfg.t_max);
  const DecayFit fit = decay_fit(sup, 1.5, tb);
  return report("slope of log sup rho on [1.5, " + num(tb) + "] = " + std::to_string(-cfg.dim) + " +- 0.1",
                std::abs(fit.slope + cfg.dim) <= 0.1, "slope " + num(fit.slope));
}

int cmd_suite(const Common& c, const std::vector<std::string>& names) {
  const SimConfig cfg = c.load();
  const AcceptanceSetup setup = cfg.dim == 2 ? AcceptanceSetup(cfg) : AcceptanceSetup();
  bool ok = true;
  std::ostringstream table;
  for (const std::string& n : names) {
    const SuiteResult r = run_suite(n, setup);
    print_suite(std::cout, r);
    std::cout.flush();
    ok = ok && r.pass();
    std::size_t passed = 0, gating = 0;
    for (const CheckLine& l : r.checks)
      if (l.gating) {
        ++gating;
        passed += l.pass;
      }
    table << std::left << std::setw(18) << n << std::setw(6) << (r.pass() ? "PASS" : "FAIL") << passed << '/' << gating
          << " checks, " << num(r.seconds) << " s\n";
  }
  if (names.size() > 1) std::cout << "\nsuite             result\n" << table.str();
  return ok ? 0 : 1;
}

int cmd_kernel_check(const Common& c) {
  std::ofstream os = c.open("kernel.csv");
  os << "n,x_norm,value,error\n" << std::setprecision(17);
  int rc = 0;
  for (int n : {2, 3}) {
    for (double r : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      const KernelQuadrature k = kernel_bound_quadrature(n, Vec{r, 0.0, 0.0});
      os << n << ',' << r << ',' << k.value << ',' << k.error << '\n';
      std::cout << "K_" << n << "(|x| = " << r << ") = " << num(k.value, 10) << " +- " << num(k.error) << '\n';
      if (r == 0.0)
        rc |= report("K_" + std::to_string(n) + "(0) = 2 pi +- 1e-3", std::abs(k.value - 2.0 * std::numbers::pi) <= 1e-3,
                     num(k.value, 10));
    }
  }
  rc |= cmd_suite(c, {"kernel"});
  return rc;
}

int cmd_simulate(const Common& c) {
  const SimConfig cfg = c.load();
  const fs::path hist = c.output("history.vptrap");
  std::ofstream diag = c.open("diagnostics.csv");
  const SimulationResult r = run_simulation(cfg, reference_initial(cfg));
  write_history_file(hist.string(), r.history);
  write_diagnostics_csv(diag, r.report);
  for (const std::string& w : r.report.warnings) std::cout << "warning: " << w << '\n';
  const DecayFit fit = decay_fit(r.report.series(r.report.sup_force), 1.0, cfg.t_max);
  std::cout << "slope of log sup|grad phi| on [1, " << cfg.t_max << "]: " << num(fit.slope) << " +- "
            << num(fit.stderr_) << '\n';
  std::cout << "wrote " << hist.string() << " (" << r.history.size() << " snapshots) and "
            << (fs::path(c.out) / "diagnostics.csv").string() << '\n';
  return 0;
}

int cmd_trapped_set(const Common& c, const std::string& history, int per_axis, double half_width) {
  if (history.empty()) throw UsageError("trapped-set requires --history PATH (write one with `vptrap simulate`)");
  const SimConfig cfg = c.load();
  const FieldHistory h = read_history_file(history);
  if (h.dim != cfg.dim) throw UsageError("history is " + std::to_string(h.dim) + "D but the config says " + std::to_string(cfg.dim) + "D");
  const HistoryForce F(h);
  const TrappedContext ctx = TrappedContext::from_history(F, h, cfg);
  const std::vector<ManifoldPoint> pts = sample_manifold(manifold_grid(cfg.dim, per_axis, half_width), ctx);
  std::ofstream os = c.open("manifold.csv");
  write_manifold_csv(os, pts);

  std::ofstream rep = c.open("trapped_report.txt");
  int failures = 0, max_iter = 0;
  double sup_xv = 0.0, inv = 0.0, esc_dev = 0.0;
  const double want = std::log(10.0 * std::sqrt(2.0) / 1e-3);
  for (const ManifoldPoint& m : pts) {
    if (!m.converged) {
      ++failures;
      rep << "no trapped velocity: " << m.error << '\n';
      continue;
    }
    max_iter = std::max(max_iter, m.iterations);
    for (int a = 0; a < cfg.dim; ++a) sup_xv = std::max(sup_xv, std::abs(m.p.x[a] + m.p.v[a]));
    inv = std::max(inv, invariance_check(m, ctx, std::min(1.0, ctx.t_max / 4.0)));
    try {
      esc_dev = std::max(esc_dev, std::abs(escape_test(m, 1e-3, ctx).escape_time - want));
    } catch (const NumericalError& e) {
      ++failures;
      rep << "escape test: " << e.what() << '\n';
    }
  }
  rep << "points " << pts.size() << "\nmax_iterations " << max_iter << "\nsup_abs_x_plus_v " << num(sup_xv, 17)
      << "\nmax_invariance_defect " << num(inv, 17) << "\nmax_escape_time_deviation " << num(esc_dev, 17) << '\n';
  std::cout << "sup|x+v| = " << num(sup_xv) << " (C = " << num(sup_xv / cfg.eps) << " in eps)\n";
  int rc = report("trapped velocity found at every grid point", failures == 0, std::to_string(failures) + " failures");
  rc |= report("invariance defect <= 1e-6", inv <= 1e-6, num(inv));
  rc |= report("escape time within 1 of " + num(want), esc_dev <= 1.0, "max deviation " + num(esc_dev));
  return rc;
}

int cmd_modified_coeffs(const Common& c, std::size_t particles) {
  const SimConfig cfg = c.load();
  if (cfg.dim != 2) throw UsageError("modified-coeffs is 2D only");
  std::ofstream os = c.open("coefficients.csv");
  RunOptions opt;
  opt.record_potential = true;
  const SimulationResult run = run_simulation(cfg, reference_initial(cfg), opt);
  const std::size_t n = std::min(particles, run.ensemble.size());
  const std::vector<PhasePoint> starts(run.ensemble.origins.begin(), run.ensemble.origins.begin() + static_cast<long>(n));
  const ModCoefficients coeffs = transport_coefficients(starts, run.history, cfg.mu, cfg);
  write_coefficients_csv(os, coeffs);
  const BootstrapMargins m = bootstrap_check(coeffs, run.report, cfg.eps);
  int rc = report("B2 margin < 1", m.b2 < 1.0, num(m.b2));
  rc |= report("B3 margin < 1", m.b3 < 1.0, num(m.b3) + " (x-gradient " + num(m.b3_x) + ", initial coordinates " + num(m.b3_initial) + ")");
  rc |= report("B4 margin < 1", m.b4 < 1.0, num(m.b4));
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vlasov-Poisson with a trapping potential: simulation and verification"};
  app.require_subcommand(1);
  Common c;
  std::string history;
  int per_axis = 9;
  double half_width = 1.0;
  std::size_t particles = 500;
  std::vector<std::string> suites;

  auto* lin = app.add_subcommand("linear-decay", "densities of the explicit linear solution and their decay");
  auto* alg = app.add_subcommand("verify-algebra", "commutators, Jacobi identity, weight and density identities");
  auto* ker = app.add_subcommand("kernel-check", "kernel quadrature table and scaling identity");
  auto* sim = app.add_subcommand("simulate", "particle run; writes history.vptrap and diagnostics.csv");
  auto* trp = app.add_subcommand("trapped-set", "trapped manifold from a recorded history");
  auto* mod = app.add_subcommand("modified-coeffs", "modification coefficients and bootstrap margins (2D)");
  auto* all = app.add_subcommand("full-verify", "every acceptance suite with a pass/fail table");
  for (auto* s : {lin, alg, ker, sim, trp, mod, all}) add_common(s, c);
  trp->add_option("--history", history, "history file written by simulate");
  trp->add_option("--grid", per_axis, "grid points per axis")->check(CLI::PositiveNumber);
  trp->add_option("--half-width", half_width, "grid half-width in x")->check(CLI::PositiveNumber);
  mod->add_option("--particles", particles, "characteristics to transport")->check(CLI::PositiveNumber);
  all->add_option("--suite", suites, "restrict to these suites (repeatable)")->check(CLI::IsMember(suite_names()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (c.workers > 0) set_workers(c.workers);
    if (*lin) return cmd_linear_decay(c);
    if (*alg) return cmd_suite(c, {"algebra"});
    if (*ker) return cmd_kernel_check(c);
    if (*sim) return cmd_simulate(c);
    if (*trp) return cmd_trapped_set(c, history, per_axis, half_width);
    if (*mod) return cmd_modified_coeffs(c, particles);
    if (*all) return cmd_suite(c, suites.empty() ? suite_names() : suites);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
