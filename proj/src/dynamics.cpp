#include "vptrap/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vptrap {

TangentMap identity_tangent(int dim) { return TangentMap::Identity(2 * dim, 2 * dim); }

SourceForce::SourceForce(SourceSet sources, double softening, double support_radius)
    : src_(std::move(sources)), soft2_(softening * softening), support_(support_radius) {
  src_.validate();
  if (!(softening >= 0.0)) throw Error("SourceForce: softening must be non-negative");
}

Vec SourceForce::force(double, const Vec& x) const {
  const int n = src_.dim;
  Vec out{};
  double r2x = 0.0;
  for (int a = 0; a < n; ++a) r2x += x[a] * x[a];
  if (r2x > support_ * support_) return out;
  for (std::size_t p = 0; p < src_.size(); ++p) {
    Vec d{};
    for (int a = 0; a < n; ++a) d[a] = x[a] - src_.positions[p][a];
    const Vec g = green_gradient(n, d, soft2_);
    for (int a = 0; a < n; ++a) out[a] += src_.weights[p] * g[a];
  }
  return out;
}

GridForce::GridForce(GridField field) : field_(std::move(field)) {
  if (field_.components != field_.spec.dim) throw Error("GridForce expects a vector field");
}

Vec GridForce::force(double, const Vec& x) const { return interpolate_vector(field_, x); }

Vec interpolate_vector(const GridField& g, const Vec& x) {
  const GridSpec& sp = g.spec;
  const int n = sp.dim;
  const int G = sp.cells;
  Vec out{};
  std::array<int, kMaxDim> base{};
  std::array<double, kMaxDim> frac{};
  for (int a = 0; a < n; ++a) {
    const double xi = x[a] / sp.scale;
    if (!(std::abs(xi) <= 1.0)) return out;
    // continuous node index, node i at xi_i = -1 + (i + 1/2) 2/G
    double u = (xi + 1.0) * 0.5 * G - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(G - 1));
    int i = std::min(static_cast<int>(u), G - 2);
    base[a] = i;
    frac[a] = u - i;
  }
  const int corners = 1 << n;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::array<int, kMaxDim> ijk{};
    for (int a = 0; a < n; ++a) {
      const int bit = (c >> a) & 1;
      ijk[a] = base[a] + bit;
      w *= bit ? frac[a] : 1.0 - frac[a];
    }
    if (w == 0.0) continue;
    const std::size_t node = sp.ravel(ijk);
    for (int a = 0; a < n; ++a) out[a] += w * g.at(node, a);
  }
  return out;
}

namespace {

[[noreturn]] void non_finite(double t, const Vec& x, int n) {
  std::ostringstream os;
  os.precision(17);
  os << "non-finite force at t=" << t << ", x=(";
  for (int a = 0; a < n; ++a) os << (a ? "," : "") << x[a];
  os << ")";
  throw NumericalError(os.str());
}

}  // namespace

ForceEval evaluate_force(const ForceSampler& F, double t, const Vec& x, bool with_jacobian) {
  const int n = F.dim();
  ForceEval e;
  e.f = F.force(t, x);
  for (int a = 0; a < n; ++a)
    if (!std::isfinite(e.f[a])) non_finite(t, x, n);
  if (!with_jacobian) return e;
  e.jac.resize(n, n);
  const double d = 1e-4 * F.length_scale(t);
  for (int b = 0; b < n; ++b) {
    Vec xp = x, xm = x;
    xp[b] += d;
    xm[b] -= d;
    const Vec fp = F.force(t, xp), fm = F.force(t, xm);
    for (int a = 0; a < n; ++a) {
      e.jac(a, b) = (fp[a] - fm[a]) / (2.0 * d);
      if (!std::isfinite(e.jac(a, b))) non_finite(t, x, n);
    }
  }
  return e;
}

void kick(PhasePoint& p, TangentMap* J, const ForceEval& e, double tau, int mu) {
  const int n = p.dim;
  for (int a = 0; a < n; ++a) p.v[a] -= tau * mu * e.f[a];
  if (J) {
    // rows n.. of J gain -tau mu DF times rows 0..n-1
    const ForceJacobian& D = e.jac;
    J->bottomRows(n).noalias() -= (tau * mu) * D * J->topRows(n);
  }
}

void drift(PhasePoint& p, TangentMap* J, double h) {
  const int n = p.dim;
  const double c = std::cosh(h), s = std::sinh(h);
  for (int a = 0; a < n; ++a) {
    const double x = p.x[a], v = p.v[a];
    p.x[a] = c * x + s * v;
    p.v[a] = s * x + c * v;
  }
  if (J) {
    const TangentMap top = J->topRows(n), bottom = J->bottomRows(n);
    J->topRows(n) = c * top + s * bottom;
    J->bottomRows(n) = s * top + c * bottom;
  }
}

ForceEval strang_step(PhasePoint& p, TangentMap* J, double t, double h, int mu, const ForceSampler& F,
                      const ForceEval* start) {
  if (!(h > 0.0) || h > 0.05 * (1.0 + 1e-12)) throw Error("strang_step: step must lie in (0, 0.05]");
  const bool jac = J != nullptr;
  const ForceEval e0 = start ? *start : evaluate_force(F, t, p.x, jac);
  kick(p, J, e0, 0.5 * h, mu);
  drift(p, J, h);
  ForceEval e1 = evaluate_force(F, t + h, p.x, jac);
  kick(p, J, e1, 0.5 * h, mu);
  return e1;
}

WalkResult walk_characteristic(const PhasePoint& p0, double t0, double t1, double dt, int mu, const ForceSampler& F,
                               bool with_tangent, const StepVisitor& visit) {
  if (!(t1 >= t0)) throw Error("walk_characteristic: t1 must be >= t0");
  if (!(dt > 0.0)) throw Error("walk_characteristic: dt must be positive");
  if (p0.dim != F.dim()) throw Error("walk_characteristic: dimension mismatch");
  WalkResult r;
  r.t = t0;
  r.p = p0;
  if (with_tangent) r.J = identity_tangent(p0.dim);
  TangentMap* J = with_tangent ? &r.J : nullptr;

  const long long steps = static_cast<long long>(std::ceil((t1 - t0) / dt - 1e-9));
  ForceEval e = evaluate_force(F, t0, r.p.x, with_tangent);
  if (visit && !visit(t0, r.p, J, e.f)) {
    r.stopped = true;
    return r;
  }
  for (long long k = 0; k < steps; ++k) {
    const double ta = t0 + static_cast<double>(k) * dt;
    const double tb = k + 1 == steps ? t1 : t0 + static_cast<double>(k + 1) * dt;
    e = strang_step(r.p, J, ta, tb - ta, mu, F, &e);
    r.t = tb;
    if (visit && !visit(tb, r.p, J, e.f)) {
      r.stopped = true;
      return r;
    }
  }
  return r;
}

Trajectory integrate_characteristic(const PhasePoint& p0, double t0, double t1, const SimConfig& cfg,
                                    const ForceSampler& F, bool with_tangent) {
  Trajectory tr;
  long long k = 0;
  const int stride = std::max(1, cfg.snapshot_stride);
  auto record = [&](double t, const PhasePoint& p, const TangentMap* J) {
    tr.times.push_back(t);
    tr.points.push_back(p);
    if (J) tr.tangents.push_back(*J);
  };
  const WalkResult r = walk_characteristic(p0, t0, t1, cfg.dt, cfg.mu, F, with_tangent,
                                           [&](double t, const PhasePoint& p, const TangentMap* J, const Vec&) {
                                             if (k++ % stride == 0) record(t, p, J);
                                             return true;
                                           });
  if (tr.times.back() != r.t) record(r.t, r.p, with_tangent ? &r.J : nullptr);
  return tr;
}

DuhamelResidual duhamel_residual(const Trajectory& traj, int mu, const ForceSampler& F) {
  DuhamelResidual res;
  if (traj.times.empty()) return res;
  const int n = traj.points[0].dim;
  const double t0 = traj.times[0];
  const PhasePoint& p0 = traj.points[0];
  Vec iu{}, is{};  // running int e^{-tau} mu F and int e^{tau} mu F, tau = t - t0
  Vec prev = F.force(t0, p0.x);
  for (std::size_t k = 1; k < traj.times.size(); ++k) {
    const double ta = traj.times[k - 1] - t0, tb = traj.times[k] - t0;
    const Vec cur = F.force(traj.times[k], traj.points[k].x);
    const double h = tb - ta;
    for (int a = 0; a < n; ++a) {
      iu[a] += 0.5 * h * mu * (std::exp(-ta) * prev[a] + std::exp(-tb) * cur[a]);
      is[a] += 0.5 * h * mu * (std::exp(ta) * prev[a] + std::exp(tb) * cur[a]);
    }
    const PhasePoint& p = traj.points[k];
    const double eu = std::exp(tb), es = std::exp(-tb);
    for (int a = 0; a < n; ++a) {
      const double ru = p.x[a] + p.v[a] + eu * iu[a] - eu * (p0.x[a] + p0.v[a]);
      const double rs = p.x[a] - p.v[a] - es * is[a] - es * (p0.x[a] - p0.v[a]);
      res.unstable[a] = std::max(res.unstable[a], std::abs(ru) * es);
      res.stable[a] = std::max(res.stable[a], std::abs(rs) * eu);
    }
    prev = cur;
  }
  return res;
}

}  // namespace vptrap
