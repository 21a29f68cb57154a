#include "vptrap/trapped.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace vptrap {

namespace {

double max_abs(const Vec& a, int n) {
  double m = 0.0;
  for (int i = 0; i < n; ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

double max_diff(const Vec& a, const Vec& b, int n) {
  double m = 0.0;
  for (int i = 0; i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void check_context(const TrappedContext& ctx) {
  if (!ctx.field) throw Error("trapped: no force field");
  if (!(ctx.t_max > 0.0)) throw Error("trapped: T_max must be positive");
  if (!(ctx.dt > 0.0 && ctx.dt <= 0.05)) throw Error("trapped: dt must lie in (0, 0.05]");
  if (ctx.mu != 1 && ctx.mu != -1) throw Error("trapped: mu must be +1 or -1");
}

}  // namespace

TrappedContext TrappedContext::from_history(const HistoryForce& F, const FieldHistory& h, const SimConfig& cfg) {
  if (h.t_begin() > 0.0) throw Error("trapped: history must start at t = 0");
  if (h.dim != cfg.dim) throw Error("trapped: history and config dimensions differ");
  TrappedContext ctx;
  ctx.field = &F;
  ctx.t_max = h.t_end();
  ctx.mu = cfg.mu;
  ctx.dt = cfg.dt;
  check_context(ctx);
  return ctx;
}

Vec phi_map(const PhasePoint& p, const TrappedContext& ctx) {
  check_context(ctx);
  const int n = p.dim;
  const ForceSampler& F = *ctx.field;
  Vec acc{}, prev_f{};
  double prev_t = 0.0, prev_r = -1.0;
  bool first = true;
  walk_characteristic(p, 0.0, ctx.t_max, ctx.dt, ctx.mu, F, false,
                      [&](double t, const PhasePoint& q, const TangentMap*, const Vec& f) {
                        const double r = max_abs(q.x, n);
                        if (r > F.support_radius(t) && r > prev_r) {
                          std::ostringstream os;
                          os << "escaped during evaluation at t=" << t;
                          throw EscapeError(os.str(), t);
                        }
                        if (!first) {
                          const double w = 0.5 * (t - prev_t) * ctx.mu;
                          const double ea = std::exp(-prev_t), eb = std::exp(-t);
                          for (int a = 0; a < n; ++a) acc[a] += w * (ea * prev_f[a] + eb * f[a]);
                        }
                        first = false;
                        prev_t = t;
                        prev_f = f;
                        prev_r = r;
                        return true;
                      });
  return acc;
}

Vec psi_defect(const PhasePoint& p, const TrappedContext& ctx) {
  const Vec phi = phi_map(p, ctx);
  Vec out{};
  for (int a = 0; a < p.dim; ++a) out[a] = p.x[a] + p.v[a] - phi[a];
  return out;
}

ManifoldPoint solve_trapped_velocity(const Vec& x, const TrappedContext& ctx, const PicardOptions& opt,
                                     const std::optional<Vec>& v_start) {
  const int n = ctx.dim();
  if (!(opt.tol > 0.0) || opt.max_iter < 1) throw Error("picard: tol must be positive and max_iter >= 1");
  ManifoldPoint m;
  m.p.dim = n;
  m.p.x = x;
  if (v_start) {
    m.p.v = *v_start;
  } else {
    for (int a = 0; a < n; ++a) m.p.v[a] = -x[a];
  }
  double last_step = 0.0;
  for (int k = 1; k <= opt.max_iter; ++k) {
    const Vec phi = phi_map(m.p, ctx);
    Vec next{};
    for (int a = 0; a < n; ++a) next[a] = -x[a] + phi[a];
    const double step = max_diff(next, m.p.v, n);
    // ratios of increments already at round-off level say nothing about the map
    if (k > 1 && last_step > 100.0 * opt.tol) m.contraction = std::max(m.contraction, step / last_step);
    m.p.v = next;
    m.iterations = k;
    last_step = step;
    if (step < opt.tol) {
      m.converged = true;
      break;
    }
  }
  if (!m.converged) {
    std::ostringstream os;
    os << "picard iteration did not converge in " << opt.max_iter << " iterations (contraction ratio "
       << m.contraction << ")";
    throw NumericalError(os.str());
  }
  m.phi = phi_map(m.p, ctx);
  Vec psi{};
  for (int a = 0; a < n; ++a) psi[a] = m.p.x[a] + m.p.v[a] - m.phi[a];
  m.defect = max_abs(psi, n);
  return m;
}

std::vector<Vec> manifold_grid(int dim, int per_axis, double half_width) {
  check_dim(dim);
  if (per_axis < 1) throw Error("manifold grid: need at least one point per axis");
  std::vector<Vec> out;
  std::size_t total = 1;
  for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(per_axis);
  out.reserve(total);
  const double step = per_axis > 1 ? 2.0 * half_width / (per_axis - 1) : 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    Vec x{};
    std::size_t rem = i;
    for (int d = dim - 1; d >= 0; --d) {
      const auto j = static_cast<int>(rem % static_cast<std::size_t>(per_axis));
      rem /= static_cast<std::size_t>(per_axis);
      x[d] = per_axis > 1 ? -half_width + j * step : 0.0;
    }
    out.push_back(x);
  }
  return out;
}

std::vector<ManifoldPoint> sample_manifold(const std::vector<Vec>& xs, const TrappedContext& ctx,
                                           const PicardOptions& opt, Exec exec) {
  check_context(ctx);
  std::vector<ManifoldPoint> out(xs.size());
  auto one = [&](std::size_t i) {
    try {
      out[i] = solve_trapped_velocity(xs[i], ctx, opt);
    } catch (const Error& e) {
      out[i] = ManifoldPoint{};
      out[i].p.dim = ctx.dim();
      out[i].p.x = xs[i];
      out[i].defect = std::numeric_limits<double>::quiet_NaN();
      out[i].error = e.what();
    }
  };
  const auto count = static_cast<long long>(xs.size());
  if (exec == Exec::Serial) {
    for (long long i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  }
  return out;
}

double invariance_check(const ManifoldPoint& m, const TrappedContext& ctx, double dt_shift) {
  check_context(ctx);
  if (dt_shift < 0.0 || dt_shift > ctx.t_max / 4.0) throw Error("invariance check: dt_shift must lie in [0, T_max/4]");
  if (dt_shift == 0.0) return max_abs(psi_defect(m.p, ctx), m.p.dim);
  const WalkResult w = walk_characteristic(m.p, 0.0, dt_shift, ctx.dt, ctx.mu, *ctx.field, false, {});
  const ShiftedForce shifted(*ctx.field, dt_shift);
  TrappedContext sc = ctx;
  sc.field = &shifted;
  sc.t_max = ctx.t_max - dt_shift;
  return max_abs(psi_defect(w.p, sc), m.p.dim);
}

EscapeResult escape_test(const ManifoldPoint& m, double delta, const TrappedContext& ctx, double horizon,
                         double radius) {
  check_context(ctx);
  if (!(delta > 0.0)) throw Error("escape test: delta must be positive");
  PhasePoint p = m.p;
  p.v[0] += delta;
  std::vector<double> ts, logs;
  double crossing = -1.0;
  walk_characteristic(p, 0.0, horizon, ctx.dt, ctx.mu, *ctx.field, false,
                      [&](double t, const PhasePoint& q, const TangentMap*, const Vec&) {
                        const double r = q.norm();
                        if (r > radius && !ts.empty()) {
                          // log-linear interpolation between the bracketing nodes
                          const double la = logs.back(), lb = std::log(r), lr = std::log(radius);
                          crossing = ts.back() + (t - ts.back()) * (lr - la) / (lb - la);
                          return false;
                        }
                        ts.push_back(t);
                        logs.push_back(std::log(r));
                        return true;
                      });
  if (crossing < 0.0) {
    std::ostringstream os;
    os << "did not escape before t=" << horizon << " (delta=" << delta << ")";
    throw NumericalError(os.str());
  }
  EscapeResult res;
  res.escape_time = crossing;
  // least squares over the last e-fold before the crossing
  const double floor = std::log(radius) - 1.0;
  double st = 0, sl = 0, stt = 0, stl = 0;
  int cnt = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (logs[i] < floor) continue;
    st += ts[i];
    sl += logs[i];
    stt += ts[i] * ts[i];
    stl += ts[i] * logs[i];
    ++cnt;
  }
  if (cnt < 3) throw NumericalError("escape test: too few samples in the last e-fold");
  res.growth_slope = (cnt * stl - st * sl) / (cnt * stt - st * st);
  return res;
}

TrajectoryBounds trajectory_bounds(const PhasePoint& p, const TrappedContext& ctx, double eps) {
  check_context(ctx);
  const int n = p.dim;
  TrajectoryBounds b;
  double prev = std::numeric_limits<double>::infinity();
  const double bound = 1.0 + 2.0 * std::sqrt(std::max(eps, 0.0));
  walk_characteristic(p, 0.0, ctx.t_max, ctx.dt, ctx.mu, *ctx.field, true,
                      [&](double t, const PhasePoint& q, const TangentMap* J, const Vec&) {
                        const double r = q.norm();
                        b.max_norm = std::max(b.max_norm, r);
                        if (t >= 1.0 && t <= ctx.t_max - 1.0) {
                          if (r > prev) b.eventually_decreasing = false;
                          prev = r;
                        }
                        const double dx = J->topRows(n).cwiseAbs().maxCoeff();
                        b.max_tangent_ratio = std::max(b.max_tangent_ratio, dx / (bound * std::exp(t)));
                        return true;
                      });
  return b;
}

double picard_lipschitz(const ManifoldPoint& m, const TrappedContext& ctx, double d) {
  const int n = m.p.dim;
  const Vec base = phi_map(m.p, ctx);
  double lip = 0.0;
  for (int b = 0; b < n; ++b) {
    PhasePoint q = m.p;
    q.v[b] += d;
    lip = std::max(lip, max_diff(phi_map(q, ctx), base, n) / d);
  }
  return lip;
}

void write_manifold_csv(std::ostream& os, const std::vector<ManifoldPoint>& pts) {
  if (pts.empty()) throw Error("manifold csv: no points");
  const int n = pts.front().p.dim;
  const char* axes[] = {"1", "2", "3"};
  std::string header;
  for (const char* pre : {"x", "v", "phi"})
    for (int a = 0; a < n; ++a) header += std::string(pre) + axes[a] + ",";
  os << header << "defect,iters\n";
  os.precision(17);
  for (const ManifoldPoint& m : pts) {
    for (int a = 0; a < n; ++a) os << m.p.x[a] << ',';
    for (int a = 0; a < n; ++a) os << m.p.v[a] << ',';
    for (int a = 0; a < n; ++a) os << m.phi[a] << ',';
    os << m.defect << ',' << m.iterations << '\n';
  }
}

}  // namespace vptrap
