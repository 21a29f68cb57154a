#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vptrap/dynamics.hpp"
#include "vptrap/history.hpp"
#include "vptrap/linear.hpp"
#include "vptrap/vfalgebra.hpp"

namespace vptrap {

/// Weighted samples of f. Weights are fixed at sampling time; `origins`
/// keeps each particle's t = 0 phase point.
struct ParticleEnsemble {
  int dim = 2;
  std::vector<PhasePoint> points;
  std::vector<PhasePoint> origins;
  std::vector<double> weights;
  std::vector<TangentMap> tangents;  // empty when not tracked

  std::size_t size() const { return points.size(); }
  bool has_tangents() const { return !tangents.empty(); }
  double total_weight() const;
  SourceSet sources() const;
};

/// N i.i.d. draws from f0 / mass with equal weights mass / N; identity
/// tangents when requested. Deterministic for a fixed seed.
ParticleEnsemble sample_initial(const InitialData& f0, std::int64_t n, std::uint64_t seed, bool with_tangents = true);

struct DepositStats {
  double lost_fraction = 0.0;  // particle mass whose kernel falls outside the grid
};

/// Gaussian-kernel density on the time-t grid: bandwidth 1.2 cells in the
/// rescaled coordinate, stencil +-5 cells, 1D weights normalised over the
/// full stencil. Lost mass above 5% throws; the caller decides on warnings.
GridField deposit_density(const ParticleEnsemble& e, double t, const SimConfig& cfg, DepositStats* stats = nullptr,
                          Exec exec = Exec::Parallel);

/// max over nodes of (e^t + |x|)^n rho(x).
double weighted_sup_density(const GridField& rho, double t, int n);

struct EnergyEstimate {
  double value = 0.0;
  double stderr_ = 0.0;  // Monte Carlo standard error
};

struct EnergyReport {
  std::map<std::string, EnergyEstimate> fields;  // keyed by field name, e.g. "U1"
  std::size_t skipped = 0;                       // particles with f0(z0) < 1e-300
  double total() const;
};

/// ||Z f(t)||_{L^1} for every Z in the commuting family, estimated as
/// (mass/N) sum_p |(J_p^{-1} Z(t, z_p)) . grad f0(z0_p)| / f0(z0_p).
EnergyReport estimate_energy_first_order(const ParticleEnsemble& e, const InitialData& f0, double t,
                                         Exec exec = Exec::Parallel);

struct DiagnosticsReport {
  int dim = 2;
  std::vector<double> times;
  std::vector<double> sup_force;
  std::vector<double> weighted_sup_rho;
  std::vector<double> mass;
  std::vector<std::string> energy_names;
  std::vector<std::vector<double>> energies;  // [field][snapshot]
  std::vector<std::vector<double>> energy_stderr;
  std::vector<std::string> warnings;

  DecaySeries series(const std::vector<double>& values) const { return {times, values}; }
  std::vector<double> energy_total() const;
};

/// Header t,sup_force,weighted_sup_rho,mass,E_<field>... with 17 significant
/// digits.
void write_diagnostics_csv(std::ostream& os, const DiagnosticsReport& r);

struct RunOptions {
  bool interaction = true;      // false: zero force, pure linear transport
  bool record_potential = false;
  bool track_tangents = true;
  bool energies = true;
  Exec exec = Exec::Parallel;
};

struct SimulationResult {
  FieldHistory history;
  DiagnosticsReport report;
  ParticleEnsemble ensemble;
};

/// Sample, then per step: deposit, grid force, kick-drift-kick push with
/// multilinear force interpolation. Snapshots every cfg.snapshot_stride
/// steps and at t_max.
SimulationResult run_simulation(const SimConfig& cfg, const InitialData& f0, const RunOptions& opt = {});

/// The reference initial data for a config: isotropic gaussian of mass eps,
/// widths 0.5, centred at the origin.
InitialData reference_initial(const SimConfig& cfg);

struct DecayFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;  // standard error of the slope
  std::size_t points = 0;
};

/// Least squares of log(value) against t over samples with t in [ta, tb].
DecayFit decay_fit(const DecaySeries& s, double ta, double tb);

}  // namespace vptrap
