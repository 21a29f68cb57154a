#include "vptrap/vfalgebra.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace vptrap {

namespace {

void check_index(int i, int dim) {
  if (i < 1 || i > dim) throw Error("vector field index out of range");
}

int kron(int a, int b) { return a == b ? 1 : 0; }

}  // namespace

VectorFieldId VectorFieldId::U(int i, int dim, Scope s) {
  check_dim(dim);
  check_index(i, dim);
  return {FieldKind::U, i, 0, dim, s};
}

VectorFieldId VectorFieldId::S(int i, int dim, Scope s) {
  check_dim(dim);
  check_index(i, dim);
  return {FieldKind::S, i, 0, dim, s};
}

VectorFieldId VectorFieldId::Lf(int dim, Scope s) {
  check_dim(dim);
  return {FieldKind::L, 0, 0, dim, s};
}

VectorFieldId VectorFieldId::R(int i, int j, int dim, Scope s) {
  check_dim(dim);
  check_index(i, dim);
  check_index(j, dim);
  if (i >= j) throw Error("R(i,j) requires i < j");
  return {FieldKind::R, i, j, dim, s};
}

VectorFieldId VectorFieldId::with_scope(Scope s) const {
  VectorFieldId r = *this;
  r.scope = s;
  return r;
}

std::string VectorFieldId::name() const {
  switch (kind) {
    case FieldKind::U: return "U" + std::to_string(i);
    case FieldKind::S: return "S" + std::to_string(i);
    case FieldKind::L: return "L";
    case FieldKind::R: return "R" + std::to_string(i) + std::to_string(j);
  }
  return "?";
}

std::vector<VectorFieldId> all_fields(int dim, Scope s) {
  std::vector<VectorFieldId> out;
  for (int i = 1; i <= dim; ++i) out.push_back(VectorFieldId::U(i, dim, s));
  for (int i = 1; i <= dim; ++i) out.push_back(VectorFieldId::S(i, dim, s));
  out.push_back(VectorFieldId::Lf(dim, s));
  for (int i = 1; i <= dim; ++i)
    for (int j = i + 1; j <= dim; ++j) out.push_back(VectorFieldId::R(i, j, dim, s));
  return out;
}

std::vector<VectorFieldId> unstable_family(int dim, Scope s) {
  std::vector<VectorFieldId> out;
  for (const auto& z : all_fields(dim, s))
    if (!z.stable()) out.push_back(z);
  return out;
}

void FieldCombination::add(const VectorFieldId& id, int coeff) {
  if (coeff == 0) return;
  const int c = (terms[id] += coeff);
  if (c == 0) terms.erase(id);
}

void FieldCombination::add_r(int i, int j, int dim, Scope s, int coeff) {
  if (i == j) return;
  if (i < j) add(VectorFieldId::R(i, j, dim, s), coeff);
  else add(VectorFieldId::R(j, i, dim, s), -coeff);
}

FieldCombination& FieldCombination::operator+=(const FieldCombination& o) {
  for (const auto& [id, c] : o.terms) add(id, c);
  return *this;
}

FieldCombination FieldCombination::operator-() const {
  FieldCombination r;
  for (const auto& [id, c] : terms) r.terms[id] = -c;
  return r;
}

std::string FieldCombination::str() const {
  if (terms.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [id, c] : terms) {
    if (!first) os << (c > 0 ? " + " : " - ");
    else if (c < 0) os << "-";
    const int a = std::abs(c);
    if (a != 1) os << a << "*";
    os << id.name();
    first = false;
  }
  return os.str();
}

FieldCombination commute(const VectorFieldId& a, const VectorFieldId& b) {
  if (a.scope != b.scope) throw Error("commute: mixed microscopic and macroscopic fields");
  if (a.dim != b.dim) throw Error("commute: fields of different dimension");
  const int n = a.dim;
  const Scope sc = a.scope;
  FieldCombination r;
  using K = FieldKind;

  auto translation = [&](const VectorFieldId& t, const VectorFieldId& rot, int sign) {
    // [T_k, R_ij] = d_ki T_j - d_kj T_i
    auto make = [&](int idx) { return t.kind == K::U ? VectorFieldId::U(idx, n, sc) : VectorFieldId::S(idx, n, sc); };
    if (t.i == rot.i) r.add(make(rot.j), sign);
    if (t.i == rot.j) r.add(make(rot.i), -sign);
  };

  const bool at = a.kind == K::U || a.kind == K::S;
  const bool bt = b.kind == K::U || b.kind == K::S;
  if (at && bt) return r;
  if (at && b.kind == K::L) {
    r.add(a, 1);
    return r;
  }
  if (a.kind == K::L && bt) {
    r.add(b, -1);
    return r;
  }
  if (at && b.kind == K::R) {
    translation(a, b, 1);
    return r;
  }
  if (a.kind == K::R && bt) {
    translation(b, a, -1);
    return r;
  }
  if (a.kind == K::L || b.kind == K::L) return r;  // [L, L] = [L, R] = 0

  // [R_ij, R_kl] = d_jk R_il - d_ik R_jl - d_jl R_ik + d_il R_jk
  const int i = a.i, j = a.j, k = b.i, l = b.j;
  r.add_r(i, l, n, sc, kron(j, k));
  r.add_r(j, l, n, sc, -kron(i, k));
  r.add_r(i, k, n, sc, -kron(j, l));
  r.add_r(j, k, n, sc, kron(i, l));
  return r;
}

FieldCombination commute(const FieldCombination& a, const VectorFieldId& b) {
  FieldCombination r;
  for (const auto& [id, c] : a.terms) {
    FieldCombination t = commute(id, b);
    for (const auto& [tid, tc] : t.terms) r.add(tid, c * tc);
  }
  return r;
}

FieldCombination commute(const FieldCombination& a, const FieldCombination& b) {
  FieldCombination r;
  for (const auto& [id, c] : b.terms) {
    FieldCombination t = commute(a, id);
    for (const auto& [tid, tc] : t.terms) r.add(tid, c * tc);
  }
  return r;
}

AffineField affine_field(const VectorFieldId& z, double t) {
  const int n = z.dim;
  const int m = 2 * n;
  AffineField f{PhaseMatrix::Zero(m, m), PhaseVector::Zero(m)};
  const bool micro = z.scope == Scope::Microscopic;
  switch (z.kind) {
    case FieldKind::U:
      f.b(z.i - 1) = std::exp(t);
      if (micro) f.b(n + z.i - 1) = std::exp(t);
      break;
    case FieldKind::S:
      f.b(z.i - 1) = std::exp(-t);
      if (micro) f.b(n + z.i - 1) = -std::exp(-t);
      break;
    case FieldKind::L:
      for (int a = 0; a < n; ++a) f.A(a, a) = 1.0;
      if (micro)
        for (int a = n; a < m; ++a) f.A(a, a) = 1.0;
      break;
    case FieldKind::R: {
      // x_i d_j - x_j d_i (+ the same in v)
      const int i = z.i - 1, j = z.j - 1;
      f.A(j, i) = 1.0;
      f.A(i, j) = -1.0;
      if (micro) {
        f.A(n + j, n + i) = 1.0;
        f.A(n + i, n + j) = -1.0;
      }
      break;
    }
  }
  return f;
}

PhaseVector to_vector(const PhasePoint& p) {
  PhaseVector z(2 * p.dim);
  for (int i = 0; i < p.dim; ++i) {
    z(i) = p.x[i];
    z(p.dim + i) = p.v[i];
  }
  return z;
}

PhasePoint from_vector(const PhaseVector& z, int dim) {
  PhasePoint p = PhasePoint::zero(dim);
  for (int i = 0; i < dim; ++i) {
    p.x[i] = z(i);
    p.v[i] = z(dim + i);
  }
  return p;
}

double apply_composition(const std::vector<AffineField>& f, const PhaseDerivs& d, const PhaseVector& z) {
  const int m = d.m;
  auto grad_dot = [&](const PhaseVector& a) {
    double s = 0.0;
    for (int p = 0; p < m; ++p) s += d.grad[p] * a(p);
    return s;
  };
  auto hess = [&](const PhaseVector& a, const PhaseVector& b) {
    double s = 0.0;
    for (int p = 0; p < m; ++p)
      for (int q = 0; q < m; ++q) s += a(p) * d.h(p, q) * b(q);
    return s;
  };
  switch (f.size()) {
    case 0:
      return d.value;
    case 1:
      return grad_dot(f[0].at(z));
    case 2: {
      const PhaseVector a1 = f[0].at(z), a2 = f[1].at(z);
      return grad_dot(f[1].A * a1) + hess(a1, a2);
    }
    case 3: {
      const PhaseVector a1 = f[0].at(z), a2 = f[1].at(z), a3 = f[2].at(z);
      double third = 0.0;
      for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q) {
          const double w = a1(p) * a2(q);
          if (w == 0.0) continue;
          for (int r = 0; r < m; ++r) third += w * a3(r) * d.t3(p, q, r);
        }
      return grad_dot(f[2].A * (f[1].A * a1)) + hess(f[2].A * a2, a1) + hess(f[1].A * a1, a3) +
             hess(a2, f[2].A * a1) + third;
    }
    default:
      throw Error("apply_composition supports at most three fields");
  }
}

double sum_abs_compositions(const std::vector<AffineField>& fam, const PhaseDerivs& d, const PhaseVector& z,
                            int max_len) {
  if (max_len > 3) throw Error("sum_abs_compositions supports words of length at most three");
  constexpr int KM = 7;
  const int K = static_cast<int>(fam.size());
  if (K > KM) throw Error("sum_abs_compositions: family too large");
  const int m = d.m;
  using V = std::array<double, 6>;
  auto dot = [m](const V& a, const V& b) {
    double s = 0.0;
    for (int p = 0; p < m; ++p) s += a[p] * b[p];
    return s;
  };
  auto mat = [m](const PhaseMatrix& A, const V& a) {
    V r{};
    for (int p = 0; p < m; ++p)
      for (int q = 0; q < m; ++q) r[p] += A(p, q) * a[q];
    return r;
  };

  std::array<V, KM> a{}, Ha{}, Atg{};
  std::array<std::array<V, KM>, KM> Aa{};  // Aa[k][j] = A_k a_j
  V g{};
  for (int p = 0; p < m; ++p) g[p] = d.grad[p];
  for (int k = 0; k < K; ++k) {
    const PhaseVector ak = fam[k].at(z);
    for (int p = 0; p < m; ++p) a[k][p] = ak(p);
  }
  double total = std::abs(d.value);
  if (max_len < 1) return total;
  for (int k = 0; k < K; ++k) total += std::abs(dot(g, a[k]));
  if (max_len < 2) return total;

  for (int k = 0; k < K; ++k) {
    for (int p = 0; p < m; ++p) {
      double s = 0.0, t = 0.0;
      for (int q = 0; q < m; ++q) {
        s += d.h(p, q) * a[k][q];
        t += fam[k].A(q, p) * g[q];
      }
      Ha[k][p] = s;
      Atg[k][p] = t;
    }
    for (int j = 0; j < K; ++j) Aa[k][j] = mat(fam[k].A, a[j]);
  }
  for (int j = 0; j < K; ++j)
    for (int k = 0; k < K; ++k) total += std::abs(dot(Aa[k][j], g) + dot(a[j], Ha[k]));
  if (max_len < 3) return total;

  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) {
      V Ta{};
      for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q) {
          const double w = a[i][p] * a[j][q];
          if (w == 0.0) continue;
          for (int r = 0; r < m; ++r) Ta[r] += w * d.t3(p, q, r);
        }
      for (int k = 0; k < K; ++k)
        total += std::abs(dot(Atg[k], Aa[j][i]) + dot(Aa[k][j], Ha[i]) + dot(Aa[j][i], Ha[k]) +
                          dot(Ha[j], Aa[k][i]) + dot(Ta, a[k]));
    }
  return total;
}

GridField fd_partial(const GridField& g, int axis, Exec exec) {
  if (g.components != 1) throw Error("fd_partial expects a scalar field");
  const GridSpec& sp = g.spec;
  if (axis < 0 || axis >= sp.dim) throw Error("fd_partial: axis out of range");
  if (sp.cells < 5) throw Error("fd_partial: at least 5 cells per axis required");
  GridField out = GridField::scalar(sp, g.time);
  const double h = sp.cell_width();
  std::size_t stride = 1;
  for (int d = sp.dim - 1; d > axis; --d) stride *= static_cast<std::size_t>(sp.cells);
  const int G = sp.cells;
  const long long total = static_cast<long long>(sp.nodes());

  auto one = [&](long long node) {
    const std::size_t idx = static_cast<std::size_t>(node);
    const int k = static_cast<int>((idx / stride) % static_cast<std::size_t>(G));
    auto f = [&](int off) { return g.data[idx + static_cast<std::ptrdiff_t>(off) * static_cast<std::ptrdiff_t>(stride)]; };
    double r;
    if (k >= 2 && k <= G - 3) r = (f(-2) - 8.0 * f(-1) + 8.0 * f(1) - f(2)) / (12.0 * h);
    else if (k == 0) r = (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) / (12.0 * h);
    else if (k == 1) r = (-3.0 * f(-1) - 10.0 * f(0) + 18.0 * f(1) - 6.0 * f(2) + f(3)) / (12.0 * h);
    else if (k == G - 1) r = (25.0 * f(0) - 48.0 * f(-1) + 36.0 * f(-2) - 16.0 * f(-3) + 3.0 * f(-4)) / (12.0 * h);
    else r = (3.0 * f(1) + 10.0 * f(0) - 18.0 * f(-1) + 6.0 * f(-2) - f(-3)) / (12.0 * h);
    out.data[idx] = r;
  };
  if (exec == Exec::Serial) {
    for (long long i = 0; i < total; ++i) one(i);
  } else {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < total; ++i) one(i);
  }
  return out;
}

GridField fd_gradient(const GridField& g, Exec exec) {
  GridField out = GridField::vector(g.spec, g.time);
  for (int a = 0; a < g.spec.dim; ++a) {
    const GridField d = fd_partial(g, a, exec);
    for (std::size_t i = 0; i < g.spec.nodes(); ++i) out.at(i, a) = d.data[i];
  }
  return out;
}

GridField apply_macroscopic(const VectorFieldId& z, const GridField& g, double t, Exec exec) {
  if (z.scope != Scope::Macroscopic) throw Error("apply_macroscopic: field " + z.name() + " is microscopic");
  if (g.components != 1) throw Error("apply_macroscopic expects a scalar field");
  if (z.dim != g.spec.dim) throw Error("apply_macroscopic: dimension mismatch");
  if (g.spec.cells < 32) throw Error("apply_macroscopic: grid resolution must be at least 32 per axis");
  GridField out = GridField::scalar(g.spec, g.time);
  const std::size_t nodes = g.spec.nodes();
  switch (z.kind) {
    case FieldKind::U:
    case FieldKind::S: {
      const double w = z.kind == FieldKind::U ? std::exp(t) : std::exp(-t);
      const GridField d = fd_partial(g, z.i - 1, exec);
      for (std::size_t k = 0; k < nodes; ++k) out.data[k] = w * d.data[k];
      break;
    }
    case FieldKind::L: {
      const GridField grad = fd_gradient(g, exec);
      for (std::size_t k = 0; k < nodes; ++k) {
        const Vec x = g.spec.position(k);
        double s = 0.0;
        for (int a = 0; a < g.spec.dim; ++a) s += x[a] * grad.at(k, a);
        out.data[k] = s;
      }
      break;
    }
    case FieldKind::R: {
      const GridField di = fd_partial(g, z.i - 1, exec);
      const GridField dj = fd_partial(g, z.j - 1, exec);
      for (std::size_t k = 0; k < nodes; ++k) {
        const Vec x = g.spec.position(k);
        out.data[k] = x[z.i - 1] * dj.data[k] - x[z.j - 1] * di.data[k];
      }
      break;
    }
  }
  return out;
}

double weight_decomposition_check(int j, const GridField& g, Exec exec) {
  const int n = g.spec.dim;
  check_index(j, n);
  const GridField dj = fd_partial(g, j - 1, exec);
  const GridField lg = apply_macroscopic(VectorFieldId::Lf(n, Scope::Macroscopic), g, 0.0, exec);
  std::vector<GridField> rij(n + 1);
  std::vector<int> sign(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    if (i == j) continue;
    if (i < j) {
      rij[i] = apply_macroscopic(VectorFieldId::R(i, j, n, Scope::Macroscopic), g, 0.0, exec);
      sign[i] = 1;
    } else {
      rij[i] = apply_macroscopic(VectorFieldId::R(j, i, n, Scope::Macroscopic), g, 0.0, exec);
      sign[i] = -1;
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < g.spec.nodes(); ++k) {
    if (!g.spec.interior(k, 2)) continue;
    const Vec x = g.spec.position(k);
    double r2 = 0.0;
    for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
    double rhs = x[j - 1] * lg.data[k];
    for (int i = 1; i <= n; ++i)
      if (i != j) rhs += x[i - 1] * sign[i] * rij[i].data[k];
    worst = std::max(worst, std::abs(r2 * dj.data[k] - rhs));
  }
  return worst;
}

std::vector<CommutationResult> density_commutation_checks(const InitialData& f0, const std::vector<VectorFieldId>& zs,
                                                          double t, const SimConfig& cfg, const CommutationOptions& opt,
                                                          Exec exec) {
  constexpr int kSlots = 11;  // density plus up to ten fields (n = 3)
  const int n = f0.dim();
  if (cfg.dim != n) throw Error("density_commutation_check: dimension mismatch");
  const int nz = static_cast<int>(zs.size());
  if (nz > kSlots - 1) throw Error("density_commutation_check: too many fields");
  for (const auto& z : zs)
    if (z.dim != n) throw Error("density_commutation_check: dimension mismatch");
  std::vector<CommutationResult> res(zs.size());
  if (f0.amplitude == 0.0) return res;

  // Sparse affine coefficients of each microscopic field: entries (q, r, c)
  // of A with r = 6 marking the constant part b.
  struct Entry {
    int q, r;
    double c;
  };
  const int m = 2 * n;
  std::vector<std::vector<Entry>> coef(zs.size());
  for (int k = 0; k < nz; ++k) {
    const AffineField a = affine_field(zs[k].with_scope(Scope::Microscopic), t);
    for (int q = 0; q < m; ++q) {
      for (int r = 0; r < m; ++r)
        if (a.A(q, r) != 0.0) coef[k].push_back({q, r, a.A(q, r)});
      if (a.b(q) != 0.0) coef[k].push_back({q, 6, a.b(q)});
    }
  }
  const double c = std::cosh(t), s = std::sinh(t);
  const GridSpec spec = grid_at(t, cfg);
  const auto grids = velocity_integrals<kSlots>(
      f0, t, spec,
      [&](const PhasePoint& p, const PhasePoint& z0, std::array<double, kSlots>& out) {
        out.fill(0.0);
        const PhaseGrad g = value_and_gradient(f0, z0);
        if (g.value == 0.0) return;
        out[0] = g.value;
        // gradient of f(t, .) = f0 o backward flow
        std::array<double, 7> zf{};
        std::array<double, 6> grad{};
        for (int i = 0; i < n; ++i) {
          zf[i] = p.x[i];
          zf[n + i] = p.v[i];
          grad[i] = c * g.grad[i] - s * g.grad[n + i];
          grad[n + i] = -s * g.grad[i] + c * g.grad[n + i];
        }
        zf[6] = 1.0;
        for (int k = 0; k < nz; ++k) {
          double acc = 0.0;
          for (const Entry& e : coef[k]) acc += e.c * zf[e.r] * grad[e.q];
          out[k + 1] = acc;
        }
      },
      opt.quadrature, exec);

  const GridField& rho = grids[0];
  double sup_rho = 0.0;
  for (double v : rho.data) sup_rho = std::max(sup_rho, v);
  for (int k = 0; k < nz; ++k) {
    const GridField lhs = apply_macroscopic(zs[k].with_scope(Scope::Macroscopic), rho, t, exec);
    const bool add_n = zs[k].kind == FieldKind::L && !opt.omit_n_term;
    res[k].sup_rho = sup_rho;
    for (std::size_t i = 0; i < spec.nodes(); ++i) {
      if (!spec.interior(i, opt.band)) continue;
      const double expected = grids[k + 1].data[i] + (add_n ? n * rho.data[i] : 0.0);
      res[k].residual = std::max(res[k].residual, std::abs(lhs.data[i] - expected));
    }
  }
  return res;
}

CommutationResult density_commutation_check(const InitialData& f0, const VectorFieldId& z, double t,
                                            const SimConfig& cfg, const CommutationOptions& opt, Exec exec) {
  return density_commutation_checks(f0, {z}, t, cfg, opt, exec)[0];
}

double sobolev_denominator(const InitialData& f0, const SobolevOptions& opt, Exec exec) {
  f0.validate();
  if (f0.amplitude == 0.0) return 0.0;
  const int n = f0.dim();
  const int m = 2 * n;
  std::vector<AffineField> family;
  for (const auto& z : unstable_family(n)) family.push_back(affine_field(z, 0.0));

  if (n == 2) {
    // Midpoint rule on the support box of f0 in R^4.
    const int q = opt.quadrature_nodes;
    std::array<double, 4> lo{}, step{};
    for (int a = 0; a < m; ++a) {
      const double r = a < n ? f0.support_radius_x() : f0.support_radius_v();
      const double c = a < n ? f0.center.x[a] : f0.center.v[a - n];
      lo[a] = c - r;
      step[a] = 2.0 * r / q;
    }
    std::vector<double> slab(static_cast<std::size_t>(q), 0.0);
    auto run_slab = [&](int i0) {
      double acc = 0.0;
      PhaseVector z(m);
      for (int i1 = 0; i1 < q; ++i1)
        for (int i2 = 0; i2 < q; ++i2)
          for (int i3 = 0; i3 < q; ++i3) {
            const int idx[4] = {i0, i1, i2, i3};
            for (int a = 0; a < m; ++a) z(a) = lo[a] + (idx[a] + 0.5) * step[a];
            const PhaseDerivs d = derivatives(f0, from_vector(z, n), 2);
            if (d.value == 0.0) continue;
            acc += sum_abs_compositions(family, d, z, n);
          }
      slab[static_cast<std::size_t>(i0)] = acc;
    };
    if (exec == Exec::Serial) {
      for (int i0 = 0; i0 < q; ++i0) run_slab(i0);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
      for (int i0 = 0; i0 < q; ++i0) run_slab(i0);
    }
    double total = 0.0;
    for (double s : slab) total += s;
    double cell = 1.0;
    for (int a = 0; a < m; ++a) cell *= step[a];
    return total * cell;
  }

  // n = 3: importance sampling from f0 / mass.
  const std::int64_t N = opt.mc_samples;
  std::vector<PhasePoint> pts(static_cast<std::size_t>(N));
  std::mt19937_64 rng(opt.seed);
  std::uint64_t proposals = 0;
  for (auto& p : pts) p = draw_phase_point(f0, rng, proposals);
  std::vector<double> contrib(pts.size(), 0.0);
  auto one = [&](std::int64_t k) {
    const PhasePoint& p = pts[static_cast<std::size_t>(k)];
    const PhaseDerivs d = derivatives(f0, p, 3);
    if (d.value <= 0.0) return;
    const PhaseVector z = to_vector(p);
    contrib[static_cast<std::size_t>(k)] = sum_abs_compositions(family, d, z, n) / d.value;
  };
  if (exec == Exec::Serial) {
    for (std::int64_t k = 0; k < N; ++k) one(k);
  } else {
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t k = 0; k < N; ++k) one(k);
  }
  double total = 0.0;
  for (double c : contrib) total += c;
  return f0.mass() * total / static_cast<double>(N);
}

SobolevParts sobolev_ratio(const InitialData& f0, double t, const SimConfig& cfg, const SobolevOptions& opt,
                           Exec exec) {
  SobolevParts r;
  if (f0.amplitude == 0.0) return r;
  const GridField rho = linear_density_on_grid(f0, t, cfg, opt.quadrature, exec);
  const int n = f0.dim();
  const double et = std::exp(t);
  for (std::size_t k = 0; k < rho.spec.nodes(); ++k) {
    const Vec x = rho.spec.position(k);
    double r2 = 0.0;
    for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
    r.numerator = std::max(r.numerator, std::pow(et + std::sqrt(r2), n) * rho.data[k]);
  }
  r.denominator = sobolev_denominator(f0, opt, exec);
  if (!(r.denominator > 0.0)) {
    if (r.numerator > 0.0) throw NumericalError("sobolev_ratio: zero denominator with nonzero density");
    return r;
  }
  r.ratio = r.numerator / r.denominator;
  return r;
}

}  // namespace vptrap
