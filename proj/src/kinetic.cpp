#include "vptrap/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <omp.h>

namespace vptrap {

double ParticleEnsemble::total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

SourceSet ParticleEnsemble::sources() const {
  SourceSet s;
  s.dim = dim;
  s.weights = weights;
  s.positions.reserve(size());
  for (const PhasePoint& p : points) s.positions.push_back(p.x);
  return s;
}

ParticleEnsemble sample_initial(const InitialData& f0, std::int64_t n, std::uint64_t seed, bool with_tangents) {
  f0.validate();
  if (n <= 0) throw ConfigError("particle count must be positive");
  ParticleEnsemble e;
  e.dim = f0.dim();
  std::mt19937_64 rng(seed);
  std::uint64_t proposals = 0;
  e.points.reserve(static_cast<std::size_t>(n));
  for (std::int64_t p = 0; p < n; ++p) e.points.push_back(draw_phase_point(f0, rng, proposals));
  if (proposals > 0 && static_cast<double>(n) < 0.01 * static_cast<double>(proposals))
    throw NumericalError("sample_initial: rejection efficiency below 1%");
  e.origins = e.points;
  e.weights.assign(static_cast<std::size_t>(n), f0.mass() / static_cast<double>(n));
  if (with_tangents) e.tangents.assign(static_cast<std::size_t>(n), identity_tangent(e.dim));
  return e;
}

namespace {

constexpr double kBandwidth = 1.2;  // cells
constexpr int kReach = 5;           // cells either side
constexpr int kStencil = 2 * kReach + 1;

struct Stencil {
  std::array<int, kMaxDim> first{};
  std::array<std::array<double, kStencil>, kMaxDim> w{};
  double inside = 1.0;  // fraction of the kernel that lands on the grid
};

Stencil make_stencil(const GridSpec& sp, const Vec& x) {
  Stencil s;
  const int G = sp.cells;
  for (int a = 0; a < sp.dim; ++a) {
    const double u = (x[a] / sp.scale + 1.0) * 0.5 * G - 0.5;
    const double uc = std::round(u);
    const int c = std::abs(uc) < 1e9 ? static_cast<int>(uc) : -1000000000;
    s.first[a] = c - kReach;
    double total = 0.0, in = 0.0;
    for (int k = 0; k < kStencil; ++k) {
      const double d = (u - (c - kReach + k)) / kBandwidth;
      const double w = std::exp(-0.5 * d * d);
      s.w[a][k] = w;
      total += w;
      const int node = c - kReach + k;
      if (node >= 0 && node < G) in += w;
    }
    for (int k = 0; k < kStencil; ++k) s.w[a][k] /= total;
    s.inside *= in / total;
  }
  return s;
}

void add_particle(const GridSpec& sp, const Stencil& s, double mass, std::vector<double>& grid) {
  const int G = sp.cells;
  auto lo = [&](int a) { return std::max(0, -s.first[a]); };
  auto hi = [&](int a) { return std::min(kStencil, G - s.first[a]); };
  if (sp.dim == 2) {
    for (int i = lo(0); i < hi(0); ++i) {
      const double wi = mass * s.w[0][i];
      double* row = &grid[static_cast<std::size_t>(s.first[0] + i) * G + s.first[1]];
      for (int j = lo(1); j < hi(1); ++j) row[j] += wi * s.w[1][j];
    }
  } else {
    for (int i = lo(0); i < hi(0); ++i)
      for (int j = lo(1); j < hi(1); ++j) {
        const double wij = mass * s.w[0][i] * s.w[1][j];
        double* row = &grid[(static_cast<std::size_t>(s.first[0] + i) * G + (s.first[1] + j)) * G + s.first[2]];
        for (int k = lo(2); k < hi(2); ++k) row[k] += wij * s.w[2][k];
      }
  }
}

}  // namespace

GridField deposit_density(const ParticleEnsemble& e, double t, const SimConfig& cfg, DepositStats* stats, Exec exec) {
  const GridSpec sp = grid_at(t, cfg);
  if (sp.dim != e.dim) throw Error("deposit_density: dimension mismatch");
  GridField rho = GridField::scalar(sp, t);
  const double inv_vol = 1.0 / sp.cell_volume();
  const long long np = static_cast<long long>(e.size());
  double lost = 0.0;

  if (exec == Exec::Serial) {
    for (long long p = 0; p < np; ++p) {
      const Stencil s = make_stencil(sp, e.points[p].x);
      lost += e.weights[p] * (1.0 - s.inside);
      add_particle(sp, s, e.weights[p] * inv_vol, rho.data);
    }
  } else {
    const int nt = std::max(1, workers());
    std::vector<std::vector<double>> partial(nt);
    std::vector<double> lost_part(nt, 0.0);
#pragma omp parallel num_threads(nt)
    {
      const int id = omp_get_thread_num();
      const int used = omp_get_num_threads();
      std::vector<double>& g = partial[id];
      g.assign(sp.nodes(), 0.0);
      // contiguous chunk per worker, fixed by the worker count
      const long long a = np * id / used, b = np * (id + 1) / used;
      for (long long p = a; p < b; ++p) {
        const Stencil s = make_stencil(sp, e.points[p].x);
        lost_part[id] += e.weights[p] * (1.0 - s.inside);
        add_particle(sp, s, e.weights[p] * inv_vol, g);
      }
    }
    for (int id = 0; id < nt; ++id) {
      if (partial[id].empty()) continue;
      for (std::size_t k = 0; k < rho.data.size(); ++k) rho.data[k] += partial[id][k];
      lost += lost_part[id];
    }
  }
  const double total = e.total_weight();
  const double frac = total > 0.0 ? lost / total : 0.0;
  if (stats) stats->lost_fraction = frac;
  if (frac > 0.05) {
    std::ostringstream os;
    os << "deposit_density: " << 100.0 * frac << "% of the particle mass lies outside the grid at t=" << t;
    throw NumericalError(os.str());
  }
  return rho;
}

double weighted_sup_density(const GridField& rho, double t, int n) {
  const double et = std::exp(t);
  double best = 0.0;
  for (std::size_t k = 0; k < rho.spec.nodes(); ++k) {
    const Vec x = rho.spec.position(k);
    double r2 = 0.0;
    for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
    best = std::max(best, std::pow(et + std::sqrt(r2), n) * rho.data[k]);
  }
  return best;
}

double EnergyReport::total() const {
  double s = 0.0;
  for (const auto& [name, e] : fields) s += e.value;
  return s;
}

EnergyReport estimate_energy_first_order(const ParticleEnsemble& e, const InitialData& f0, double t, Exec exec) {
  if (!e.has_tangents()) throw Error("estimate_energy_first_order requires tangent maps");
  const int n = e.dim;
  const auto ids = all_fields(n);
  const int nf = static_cast<int>(ids.size());
  std::vector<AffineField> fields;
  for (const auto& id : ids) fields.push_back(affine_field(id, t));

  const long long np = static_cast<long long>(e.size());
  std::vector<double> terms(static_cast<std::size_t>(np) * nf, 0.0);
  std::vector<char> skip(static_cast<std::size_t>(np), 0);
  auto one = [&](long long p) {
    const PhaseGrad g = value_and_gradient(f0, e.origins[p]);
    if (!(g.value >= 1e-300)) {
      skip[p] = 1;
      return;
    }
    const PhaseVector z = to_vector(e.points[p]);
    const TangentMap Jinv = e.tangents[p].inverse();
    for (int f = 0; f < nf; ++f) {
      const PhaseVector y = Jinv * fields[f].at(z);
      double dot = 0.0;
      for (int a = 0; a < 2 * n; ++a) dot += y[a] * g.grad[a];
      terms[static_cast<std::size_t>(p) * nf + f] = std::abs(dot) / g.value;
    }
  };
  if (exec == Exec::Serial) {
    for (long long p = 0; p < np; ++p) one(p);
  } else {
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < np; ++p) one(p);
  }

  EnergyReport r;
  for (long long p = 0; p < np; ++p) r.skipped += skip[p];
  const double mass = e.total_weight();
  const double count = static_cast<double>(np);
  for (int f = 0; f < nf; ++f) {
    double s = 0.0, s2 = 0.0;
    for (long long p = 0; p < np; ++p) {
      const double v = terms[static_cast<std::size_t>(p) * nf + f];
      s += v;
      s2 += v * v;
    }
    const double mean = s / count;
    const double var = np > 1 ? std::max(0.0, (s2 - count * mean * mean) / (count - 1.0)) : 0.0;
    r.fields[ids[f].name()] = {mass * mean, mass * std::sqrt(var / count)};
  }
  return r;
}

std::vector<double> DiagnosticsReport::energy_total() const {
  std::vector<double> out(times.size(), 0.0);
  for (const auto& series : energies)
    for (std::size_t k = 0; k < series.size(); ++k) out[k] += series[k];
  return out;
}

void write_diagnostics_csv(std::ostream& os, const DiagnosticsReport& r) {
  os << "t,sup_force,weighted_sup_rho,mass";
  for (const auto& name : r.energy_names) os << ",E_" << name;
  os << "\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    os << r.times[k] << "," << r.sup_force[k] << "," << r.weighted_sup_rho[k] << "," << r.mass[k];
    for (const auto& series : r.energies) os << "," << series[k];
    os << "\n";
  }
}

InitialData reference_initial(const SimConfig& cfg) {
  return make_initial(InitialKind::Gaussian, cfg.dim, cfg.eps, 0.5, 0.5);
}

namespace {

struct StepFields {
  GridField rho;
  GridField force;
  std::optional<GridField> potential;
  double lost = 0.0;
};

StepFields fields_at(const ParticleEnsemble& e, double t, const SimConfig& cfg, const RunOptions& opt) {
  StepFields s;
  DepositStats st;
  s.rho = deposit_density(e, t, cfg, &st, opt.exec);
  s.lost = st.lost_fraction;
  if (opt.interaction) {
    const double soft = softening_at(t, cfg);
    s.force = grid_force_from_density(s.rho, soft, opt.exec);
    if (opt.record_potential) s.potential = grid_potential_from_density(s.rho, soft, opt.exec);
  } else {
    s.force = GridField::vector(s.rho.spec, t);
    if (opt.record_potential) s.potential = GridField::scalar(s.rho.spec, t);
  }
  return s;
}

void check_finite(double v, double t, const char* what) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "non-finite diagnostic " << what << " at t=" << t;
    throw NumericalError(os.str());
  }
}

}  // namespace

SimulationResult run_simulation(const SimConfig& cfg, const InitialData& f0, const RunOptions& opt) {
  if (f0.dim() != cfg.dim) throw ConfigError("initial data dimension differs from config dim");
  SimulationResult out;
  ParticleEnsemble& e = out.ensemble;
  e = sample_initial(f0, cfg.n_particles, cfg.seed, opt.track_tangents);
  const int n = cfg.dim;
  const int mu = cfg.mu;
  FieldHistory& hist = out.history;
  hist.dim = n;
  hist.cells = cfg.grid_cells;
  DiagnosticsReport& rep = out.report;
  rep.dim = n;
  if (opt.energies && opt.track_tangents)
    for (const auto& id : all_fields(n)) rep.energy_names.push_back(id.name());
  rep.energies.assign(rep.energy_names.size(), {});
  rep.energy_stderr.assign(rep.energy_names.size(), {});

  const long long steps = static_cast<long long>(std::ceil(cfg.t_max / cfg.dt - 1e-9));
  auto time_of = [&](long long k) { return k == steps ? cfg.t_max : static_cast<double>(k) * cfg.dt; };
  const int stride = std::max(1, cfg.snapshot_stride);
  int warned = 0;

  auto record = [&](long long k, const StepFields& s) {
    const double t = time_of(k);
    if (s.lost > 1e-3 && warned++ < 5) {
      std::ostringstream os;
      os << "t=" << t << ": " << 100.0 * s.lost << "% of the particle mass deposited outside the grid";
      rep.warnings.push_back(os.str());
    }
    if (k % stride != 0 && k != steps) return;
    hist.forces.push_back(s.force);
    if (s.potential) hist.potentials.push_back(*s.potential);
    rep.times.push_back(t);
    rep.sup_force.push_back(s.force.sup_magnitude());
    rep.weighted_sup_rho.push_back(weighted_sup_density(s.rho, t, n));
    rep.mass.push_back(e.total_weight());
    check_finite(rep.sup_force.back(), t, "sup_force");
    check_finite(rep.weighted_sup_rho.back(), t, "weighted_sup_rho");
    if (!rep.energy_names.empty()) {
      const EnergyReport er = estimate_energy_first_order(e, f0, t, opt.exec);
      for (std::size_t f = 0; f < rep.energy_names.size(); ++f) {
        const EnergyEstimate& est = er.fields.at(rep.energy_names[f]);
        check_finite(est.value, t, "energy");
        rep.energies[f].push_back(est.value);
        rep.energy_stderr[f].push_back(est.stderr_);
      }
    }
  };

  StepFields cur = fields_at(e, 0.0, cfg, opt);
  record(0, cur);
  const bool tang = opt.track_tangents;
  const long long np = static_cast<long long>(e.size());

  auto half_kick = [&](const GridForce& F, double t, double tau) {
    auto one = [&](long long p) {
      const ForceEval fe = evaluate_force(F, t, e.points[p].x, tang);
      kick(e.points[p], tang ? &e.tangents[p] : nullptr, fe, tau, mu);
    };
    if (opt.exec == Exec::Serial) {
      for (long long p = 0; p < np; ++p) one(p);
    } else {
#pragma omp parallel for schedule(static)
      for (long long p = 0; p < np; ++p) one(p);
    }
  };

  for (long long k = 0; k < steps; ++k) {
    const double ta = time_of(k), tb = time_of(k + 1), h = tb - ta;
    if (opt.interaction) half_kick(GridForce(cur.force), ta, 0.5 * h);
    auto push = [&](long long p) { drift(e.points[p], tang ? &e.tangents[p] : nullptr, h); };
    if (opt.exec == Exec::Serial) {
      for (long long p = 0; p < np; ++p) push(p);
    } else {
#pragma omp parallel for schedule(static)
      for (long long p = 0; p < np; ++p) push(p);
    }
    cur = fields_at(e, tb, cfg, opt);
    if (opt.interaction) half_kick(GridForce(cur.force), tb, 0.5 * h);
    record(k + 1, cur);
  }
  return out;
}

DecayFit decay_fit(const DecaySeries& s, double ta, double tb) {
  std::vector<double> t, y;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s.times[k] < ta || s.times[k] > tb) continue;
    if (!(s.values[k] > 0.0)) {
      std::ostringstream os;
      os << "decay_fit: non-positive value " << s.values[k] << " at t=" << s.times[k];
      throw Error(os.str());
    }
    t.push_back(s.times[k]);
    y.push_back(std::log(s.values[k]));
  }
  if (t.size() < 5) throw Error("decay_fit: fewer than 5 samples in the window");
  const double m = static_cast<double>(t.size());
  const double tm = std::accumulate(t.begin(), t.end(), 0.0) / m;
  const double ym = std::accumulate(y.begin(), y.end(), 0.0) / m;
  double stt = 0.0, sty = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    stt += (t[k] - tm) * (t[k] - tm);
    sty += (t[k] - tm) * (y[k] - ym);
  }
  DecayFit f;
  f.points = t.size();
  f.slope = sty / stt;
  f.intercept = ym - f.slope * tm;
  double rss = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double r = y[k] - f.intercept - f.slope * t[k];
    rss += r * r;
  }
  f.stderr_ = std::sqrt(rss / (m - 2.0) / stt);
  return f;
}

}  // namespace vptrap
