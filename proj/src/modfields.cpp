#include "vptrap/modfields.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>

#include <Eigen/Dense>

namespace vptrap {

std::vector<VectorFieldId> modified_base_fields() {
  return {VectorFieldId::U(1, 2), VectorFieldId::U(2, 2), VectorFieldId::Lf(2), VectorFieldId::R(1, 2, 2)};
}

GridField modified_source(const VectorFieldId& z, const GridField& phi, double t, int k, int mu,
                          const ModSourceOptions& opt, Exec exec) {
  if (z.stable()) throw Error("modified_source: " + z.name() + " is a stable field and carries no modification");
  if (phi.components != 1) throw Error("modified_source expects a scalar potential");
  if (k < 1 || k > phi.spec.dim) throw Error("modified_source: axis out of range");
  GridField w = apply_macroscopic(z.with_scope(Scope::Macroscopic), phi, t, exec);
  const double c = (z.kind == FieldKind::L && !opt.omit_c_term) ? -2.0 : 0.0;
  if (c != 0.0)
    for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] += c * phi.data[i];
  GridField out = fd_partial(w, k - 1, exec);
  const double scale = -0.5 * mu * std::exp(t);
  for (double& v : out.data) v *= scale;
  return out;
}

std::vector<double> ModCoefficients::envelope(std::size_t f, int k) const {
  std::vector<double> env(times.size(), 0.0);
  for (std::size_t ti = 0; ti < times.size(); ++ti)
    for (std::size_t p = 0; p < particles; ++p) env[ti] = std::max(env[ti], std::abs(value(ti, p, f, k)));
  return env;
}

namespace {

// Source fields for one snapshot, packed as a 2-component vector grid per
// base field so that both axes interpolate in one call.
std::vector<GridField> snapshot_sources(const GridField& phi, int mu, const std::vector<VectorFieldId>& fields,
                                        const ModSourceOptions& opt, Exec exec) {
  std::vector<GridField> out;
  for (const VectorFieldId& z : fields) {
    GridField packed = GridField::vector(phi.spec, phi.time);
    for (int k = 1; k <= 2; ++k) {
      const GridField s = modified_source(z, phi, phi.time, k, mu, opt, exec);
      for (std::size_t i = 0; i < phi.spec.nodes(); ++i) packed.at(i, k - 1) = s.data[i];
    }
    out.push_back(std::move(packed));
  }
  return out;
}

// Coefficient series of one characteristic: result[ti][f*2 + k-1], plus the
// phase point at each snapshot.
void transport_one(const PhasePoint& start, const FieldHistory& h, const HistoryForce& F,
                   const std::vector<std::vector<GridField>>& sources, int mu, double dt,
                   std::vector<double>& phi, std::vector<PhasePoint>& at) {
  const std::size_t nf = sources.front().size();
  const std::size_t T = h.size();
  phi.assign(T * nf * 2, 0.0);
  at.assign(T, PhasePoint{});
  std::vector<double> prev(nf * 2, 0.0), cur(nf * 2, 0.0);
  std::size_t j = 0;
  walk_characteristic(start, h.t_begin(), h.t_end(), dt, mu, F, false,
                      [&](double t, const PhasePoint& p, const TangentMap*, const Vec&) {
                        if (j >= T || std::abs(t - h.time(j)) > 1e-9 * std::max(1.0, std::abs(t))) return true;
                        for (std::size_t f = 0; f < nf; ++f) {
                          const Vec s = interpolate_vector(sources[j][f], p.x);
                          cur[f * 2] = s[0];
                          cur[f * 2 + 1] = s[1];
                        }
                        if (j > 0) {
                          const double w = 0.5 * (h.time(j) - h.time(j - 1));
                          for (std::size_t c = 0; c < nf * 2; ++c)
                            phi[j * nf * 2 + c] = phi[(j - 1) * nf * 2 + c] + w * (prev[c] + cur[c]);
                        }
                        at[j] = p;
                        prev = cur;
                        ++j;
                        return true;
                      });
  if (j != T) throw Error("transport_coefficients: history snapshot times are not on the step grid");
}

}  // namespace

ModCoefficients transport_coefficients(const std::vector<PhasePoint>& starts, const FieldHistory& h, int mu,
                                       const SimConfig& cfg, const TransportOptions& opt) {
  if (h.dim != 2) throw Error("transport_coefficients: modified fields are implemented in 2D only");
  if (!h.has_potentials()) throw Error("transport_coefficients: the history carries no potential snapshots");
  h.validate();
  if (h.t_begin() != 0.0) throw Error("transport_coefficients: history must start at t = 0");

  ModCoefficients c;
  c.fields = modified_base_fields();
  c.particles = starts.size();
  for (std::size_t j = 0; j < h.size(); ++j) c.times.push_back(h.time(j));
  const std::size_t nf = c.fields.size(), T = h.size();
  c.values.assign(T * c.particles * nf * 2, 0.0);
  if (opt.bundle) {
    c.grad_norms.assign(c.values.size(), 0.0);
    c.grad_x_norms.assign(c.values.size(), 0.0);
    c.grad_initial_norms.assign(c.values.size(), 0.0);
  }

  std::vector<std::vector<GridField>> sources;
  sources.reserve(T);
  for (std::size_t j = 0; j < T; ++j) sources.push_back(snapshot_sources(h.potentials[j], mu, c.fields, opt.source, opt.exec));

  const HistoryForce F(h);
  const double offset = opt.bundle_offset * h.forces.front().spec.scale;

  auto one = [&](std::size_t p) {
    std::vector<double> base;
    std::vector<PhasePoint> base_at;
    transport_one(starts[p], h, F, sources, mu, cfg.dt, base, base_at);
    for (std::size_t ti = 0; ti < T; ++ti)
      for (std::size_t q = 0; q < nf * 2; ++q) c.values[(ti * c.particles + p) * nf * 2 + q] = base[ti * nf * 2 + q];
    if (!opt.bundle) return;

    std::vector<std::vector<double>> mphi(4);
    std::vector<std::vector<PhasePoint>> mat(4);
    for (int m = 0; m < 4; ++m) {
      PhasePoint s = starts[p];
      if (m < 2) s.x[m] += offset;
      else s.v[m - 2] += offset;
      transport_one(s, h, F, sources, mu, cfg.dt, mphi[m], mat[m]);
    }
    for (std::size_t ti = 0; ti < T; ++ti) {
      // columns: current displacement of each member from the base point
      Eigen::Matrix4d D;
      for (int m = 0; m < 4; ++m) {
        D(0, m) = mat[m][ti].x[0] - base_at[ti].x[0];
        D(1, m) = mat[m][ti].x[1] - base_at[ti].x[1];
        D(2, m) = mat[m][ti].v[0] - base_at[ti].v[0];
        D(3, m) = mat[m][ti].v[1] - base_at[ti].v[1];
      }
      const auto lu = D.transpose().partialPivLu();
      for (std::size_t q = 0; q < nf * 2; ++q) {
        Eigen::Vector4d dphi;
        for (int m = 0; m < 4; ++m) dphi(m) = mphi[m][ti * nf * 2 + q] - base[ti * nf * 2 + q];
        const Eigen::Vector4d g = lu.solve(dphi);
        c.grad_norms[(ti * c.particles + p) * nf * 2 + q] = g.norm();
        c.grad_x_norms[(ti * c.particles + p) * nf * 2 + q] = g.head<2>().norm();
        c.grad_initial_norms[(ti * c.particles + p) * nf * 2 + q] = dphi.norm() / offset;
      }
    }
  };

  const auto count = static_cast<long long>(starts.size());
  if (opt.exec == Exec::Serial) {
    for (long long p = 0; p < count; ++p) one(static_cast<std::size_t>(p));
  } else {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (long long p = 0; p < count; ++p) {
      try {
        one(static_cast<std::size_t>(p));
      } catch (...) {
#pragma omp critical(vptrap_transport_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return c;
}

BootstrapMargins bootstrap_check(const ModCoefficients& c, const DiagnosticsReport& report, double eps) {
  if (!(eps > 0.0)) throw Error("bootstrap_check: eps must be positive");
  const double se = std::sqrt(eps);
  BootstrapMargins m;
  const std::size_t per_time = c.particles * c.fields.size() * 2;
  for (std::size_t ti = 0; ti < c.times.size(); ++ti) {
    const double bound = se * (1.0 + c.times[ti]);
    for (std::size_t q = 0; q < per_time; ++q) {
      m.b2 = std::max(m.b2, std::abs(c.values[ti * per_time + q]) / bound);
      if (c.grad_norms.empty()) continue;
      const double g = c.grad_norms[ti * per_time + q] / se;
      m.b3 = std::max(m.b3, g);
      if (g >= 1.0 && m.b3_crossing < 0.0) m.b3_crossing = c.times[ti];
      m.b3_x = std::max(m.b3_x, c.grad_x_norms[ti * per_time + q] / se);
      m.b3_initial = std::max(m.b3_initial, c.grad_initial_norms[ti * per_time + q] / se);
    }
  }
  for (std::size_t k = 0; k < report.times.size(); ++k)
    m.b4 = std::max(m.b4, report.sup_force[k] * std::exp(report.times[k]) / se);
  return m;
}

std::vector<double> coefficient_growth_slopes(const ModCoefficients& c) {
  std::vector<double> out;
  const double n = static_cast<double>(c.times.size());
  if (c.times.size() < 2) throw Error("coefficient_growth_slopes: need at least two times");
  for (std::size_t f = 0; f < c.fields.size(); ++f) {
    for (int k = 1; k <= 2; ++k) {
      const std::vector<double> env = c.envelope(f, k);
      double st = 0, se = 0, stt = 0, ste = 0;
      for (std::size_t i = 0; i < env.size(); ++i) {
        st += c.times[i];
        se += env[i];
        stt += c.times[i] * c.times[i];
        ste += c.times[i] * env[i];
      }
      out.push_back((n * ste - st * se) / (n * stt - st * st));
    }
  }
  return out;
}

void write_coefficients_csv(std::ostream& os, const ModCoefficients& c) {
  os << "t,particle_id,base_field,k,phi_value\n";
  os.precision(17);
  for (std::size_t ti = 0; ti < c.times.size(); ++ti)
    for (std::size_t p = 0; p < c.particles; ++p)
      for (std::size_t f = 0; f < c.fields.size(); ++f)
        for (int k = 1; k <= 2; ++k)
          os << c.times[ti] << ',' << p << ',' << c.fields[f].name() << ',' << k << ',' << c.value(ti, p, f, k) << '\n';
}

}  // namespace vptrap
