#include "vptrap/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace vptrap {

namespace {

constexpr double kGaussianSupport = 8.0;  // widths
constexpr double kBumpSupport = 3.0;      // widths

enum class Profile { Gaussian, Bump };

// Radial profile F(u) and its first three u-derivatives.
struct ProfileValues {
  double f = 0, d1 = 0, d2 = 0, d3 = 0;
};

ProfileValues profile(Profile p, double u) {
  ProfileValues r;
  if (p == Profile::Gaussian) {
    r.f = std::exp(-0.5 * u);
    r.d1 = -0.5 * r.f;
    r.d2 = 0.25 * r.f;
    r.d3 = -0.125 * r.f;
    return r;
  }
  // exp(-1/(1 - u/9)) on u < 9
  const double q = 1.0 - u / (kBumpSupport * kBumpSupport);
  if (q <= 0.0) return r;
  const double a = kBumpSupport * kBumpSupport;
  const double g1 = -1.0 / (a * q * q);
  const double g2 = -2.0 / (a * a * q * q * q);
  const double g3 = -6.0 / (a * a * a * q * q * q * q);
  r.f = std::exp(-1.0 / q);
  r.d1 = g1 * r.f;
  r.d2 = (g2 + g1 * g1) * r.f;
  r.d3 = (g3 + 3.0 * g1 * g2 + g1 * g1 * g1) * r.f;
  return r;
}

// Integral of F(|zeta|^2) over R^m.
double profile_mass(Profile p, int m) {
  const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * m) / boost::math::tgamma(0.5 * m);
  if (p == Profile::Gaussian) return std::pow(2.0 * std::numbers::pi, 0.5 * m);
  auto radial = [&](double r) { return profile(Profile::Bump, r * r).f * std::pow(r, m - 1); };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(radial, 0.0, kBumpSupport, 15, 1e-14);
  return sphere * integral;
}

// One radial factor of f0 acting on the x block, the v block, or both.
struct Factor {
  Profile profile = Profile::Gaussian;
  bool on_x = true;
  bool on_v = true;
};

struct FactorList {
  std::array<Factor, 2> f{};
  int count = 0;
  const Factor* begin() const { return f.data(); }
  const Factor* end() const { return f.data() + count; }
};

FactorList factors_of(const InitialData& f0) {
  switch (f0.kind) {
    case InitialKind::Gaussian:
      return {{Factor{Profile::Gaussian, true, true}}, 1};
    case InitialKind::Bump:
      return {{Factor{Profile::Bump, true, true}}, 1};
    case InitialKind::Product:
      return {{Factor{Profile::Gaussian, true, false}, Factor{Profile::Bump, false, true}}, 2};
  }
  return {};
}

double normalisation(const InitialData& f0) {
  const int n = f0.dim();
  double norm = 1.0;
  for (const Factor& fac : factors_of(f0)) {
    const int m = (fac.on_x ? n : 0) + (fac.on_v ? n : 0);
    norm *= profile_mass(fac.profile, m);
  }
  norm *= std::pow(f0.width_x, n) * std::pow(f0.width_v, n);
  return norm;
}

struct Coords {
  int m = 0;
  std::array<double, 6> z{}, c{}, w{};
};

Coords scaled_coords(const InitialData& f0, const PhasePoint& p) {
  Coords k;
  const int n = f0.dim();
  k.m = 2 * n;
  for (int i = 0; i < n; ++i) {
    k.z[i] = p.x[i];
    k.c[i] = f0.center.x[i];
    k.w[i] = f0.width_x;
    k.z[n + i] = p.v[i];
    k.c[n + i] = f0.center.v[i];
    k.w[n + i] = f0.width_v;
  }
  return k;
}

// Derivatives of a single factor, written into a PhaseDerivs with full m.
PhaseDerivs factor_derivs(const Factor& fac, const Coords& k, int n, int order) {
  PhaseDerivs d;
  d.m = k.m;
  std::array<bool, 6> mask{};
  for (int a = 0; a < k.m; ++a) mask[a] = (a < n) ? fac.on_x : fac.on_v;
  double u = 0.0;
  std::array<double, 6> ua{}, uaa{};
  for (int a = 0; a < k.m; ++a) {
    if (!mask[a]) continue;
    const double s = (k.z[a] - k.c[a]) / k.w[a];
    u += s * s;
    ua[a] = 2.0 * (k.z[a] - k.c[a]) / (k.w[a] * k.w[a]);
    uaa[a] = 2.0 / (k.w[a] * k.w[a]);
  }
  const ProfileValues F = profile(fac.profile, u);
  d.value = F.f;
  if (order < 1) return d;
  for (int a = 0; a < k.m; ++a) d.grad[a] = F.d1 * ua[a];
  if (order < 2) return d;
  for (int a = 0; a < k.m; ++a)
    for (int b = 0; b < k.m; ++b) d.hess[a * 6 + b] = F.d2 * ua[a] * ua[b] + (a == b ? F.d1 * uaa[a] : 0.0);
  if (order < 3) return d;
  for (int a = 0; a < k.m; ++a)
    for (int b = 0; b < k.m; ++b)
      for (int c = 0; c < k.m; ++c) {
        double v = F.d3 * ua[a] * ua[b] * ua[c];
        if (a == b) v += F.d2 * uaa[a] * ua[c];
        if (a == c) v += F.d2 * uaa[a] * ua[b];
        if (b == c) v += F.d2 * uaa[b] * ua[a];
        d.third[(a * 6 + b) * 6 + c] = v;
      }
  return d;
}

// Leibniz rule for the product of two functions of z.
PhaseDerivs multiply(const PhaseDerivs& f, const PhaseDerivs& g, int order) {
  PhaseDerivs r;
  const int m = f.m;
  r.m = m;
  r.value = f.value * g.value;
  if (order < 1) return r;
  for (int a = 0; a < m; ++a) r.grad[a] = f.grad[a] * g.value + f.value * g.grad[a];
  if (order < 2) return r;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      r.hess[a * 6 + b] = f.h(a, b) * g.value + f.grad[a] * g.grad[b] + f.grad[b] * g.grad[a] + f.value * g.h(a, b);
  if (order < 3) return r;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c)
        r.third[(a * 6 + b) * 6 + c] = f.t3(a, b, c) * g.value + f.h(a, b) * g.grad[c] + f.h(a, c) * g.grad[b] +
                                      f.h(b, c) * g.grad[a] + f.grad[a] * g.h(b, c) + f.grad[b] * g.h(a, c) +
                                      f.grad[c] * g.h(a, b) + f.value * g.t3(a, b, c);
  return r;
}

double support_radius(const InitialData& f0, bool x_block) {
  const double w = x_block ? f0.width_x : f0.width_v;
  for (const Factor& fac : factors_of(f0)) {
    if ((x_block && fac.on_x) || (!x_block && fac.on_v))
      return w * (fac.profile == Profile::Gaussian ? kGaussianSupport : kBumpSupport);
  }
  return 0.0;
}

}  // namespace

void InitialData::validate() const {
  check_dim(center.dim);
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw ConfigError("initial data amplitude must be finite and non-negative");
  if (!(width_x > 0.0) || !(width_v > 0.0)) throw ConfigError("initial data widths must be positive");
  if (!center.finite()) throw ConfigError("initial data centre must be finite");
}

InitialData make_initial(InitialKind kind, int dim, double amplitude, double width_x, double width_v) {
  InitialData f0;
  f0.kind = kind;
  f0.amplitude = amplitude;
  f0.center = PhasePoint::zero(dim);
  f0.width_x = width_x;
  f0.width_v = width_v;
  f0.validate();
  return f0;
}

double InitialData::support_radius_x() const { return support_radius(*this, true); }
double InitialData::support_radius_v() const { return support_radius(*this, false); }

static double cached_normalisation(const InitialData& f0);

double InitialData::value(const PhasePoint& z) const {
  const int n = dim();
  double r = amplitude / cached_normalisation(*this);
  const double ix = 1.0 / width_x, iv = 1.0 / width_v;
  for (const Factor& fac : factors_of(*this)) {
    double u = 0.0;
    if (fac.on_x)
      for (int i = 0; i < n; ++i) {
        const double s = (z.x[i] - center.x[i]) * ix;
        u += s * s;
      }
    if (fac.on_v)
      for (int i = 0; i < n; ++i) {
        const double s = (z.v[i] - center.v[i]) * iv;
        u += s * s;
      }
    if (fac.profile == Profile::Gaussian) r *= std::exp(-0.5 * u);
    else r *= profile(Profile::Bump, u).f;
  }
  return r;
}

static double cached_normalisation(const InitialData& f0) {
  // Depends only on kind, dim and widths; cache the last one per thread.
  thread_local InitialKind kind{};
  thread_local int dim = 0;
  thread_local double wx = 0, wv = 0, norm = 0;
  if (dim != f0.dim() || kind != f0.kind || wx != f0.width_x || wv != f0.width_v) {
    norm = normalisation(f0);
    kind = f0.kind;
    dim = f0.dim();
    wx = f0.width_x;
    wv = f0.width_v;
  }
  return norm;
}

PhaseDerivs derivatives(const InitialData& f0, const PhasePoint& z, int order) {
  const int n = f0.dim();
  const Coords k = scaled_coords(f0, z);
  const FactorList factors = factors_of(f0);
  PhaseDerivs acc = factor_derivs(factors.f[0], k, n, order);
  for (int i = 1; i < factors.count; ++i) acc = multiply(acc, factor_derivs(factors.f[i], k, n, order), order);
  const double scale = f0.amplitude / cached_normalisation(f0);
  acc.value *= scale;
  for (auto& g : acc.grad) g *= scale;
  for (auto& h : acc.hess) h *= scale;
  for (auto& t : acc.third) t *= scale;
  return acc;
}

PhaseGrad value_and_gradient(const InitialData& f0, const PhasePoint& z) {
  const int n = f0.dim();
  PhaseGrad r;
  r.value = f0.amplitude / cached_normalisation(f0);
  if (r.value == 0.0) return r;
  // Each factor multiplies the value by F(u) and adds F'/F du to the
  // logarithmic gradient.
  std::array<double, 6> dlog{};
  const double ix = 1.0 / f0.width_x, iv = 1.0 / f0.width_v;
  for (const Factor& fac : factors_of(f0)) {
    double u = 0.0;
    if (fac.on_x)
      for (int i = 0; i < n; ++i) {
        const double s = (z.x[i] - f0.center.x[i]) * ix;
        u += s * s;
      }
    if (fac.on_v)
      for (int i = 0; i < n; ++i) {
        const double s = (z.v[i] - f0.center.v[i]) * iv;
        u += s * s;
      }
    const ProfileValues F = profile(fac.profile, u);
    if (F.f == 0.0) return PhaseGrad{};
    r.value *= F.f;
    const double ratio = 2.0 * F.d1 / F.f;
    if (fac.on_x)
      for (int i = 0; i < n; ++i) dlog[i] = ratio * (z.x[i] - f0.center.x[i]) * ix * ix;
    if (fac.on_v)
      for (int i = 0; i < n; ++i) dlog[n + i] = ratio * (z.v[i] - f0.center.v[i]) * iv * iv;
  }
  for (int a = 0; a < 2 * n; ++a) r.grad[a] = r.value * dlog[a];
  return r;
}

double uniform01(std::mt19937_64& rng) {
  // 53 random bits, strictly inside (0, 1).
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

PhasePoint draw_phase_point(const InitialData& f0, std::mt19937_64& rng, std::uint64_t& proposals) {
  const int n = f0.dim();
  PhasePoint p = PhasePoint::zero(n);
  for (const Factor& fac : factors_of(f0)) {
    const int m = (fac.on_x ? n : 0) + (fac.on_v ? n : 0);
    std::array<double, 6> zeta{};
    if (fac.profile == Profile::Gaussian) {
      for (int a = 0; a < m; ++a) zeta[a] = std::sqrt(2.0) * boost::math::erf_inv(2.0 * uniform01(rng) - 1.0);
    } else {
      // Envelope exp(-u/9) >= exp(1 - 1/(1 - u/9)) / e^{-1}; sampled by inverse CDF.
      const double env_std = kBumpSupport / std::sqrt(2.0);
      for (;;) {
        ++proposals;
        double u = 0.0;
        for (int a = 0; a < m; ++a) {
          zeta[a] = env_std * std::sqrt(2.0) * boost::math::erf_inv(2.0 * uniform01(rng) - 1.0);
          u += zeta[a] * zeta[a];
        }
        const double target = profile(Profile::Bump, u).f / std::exp(-1.0);
        const double envelope = std::exp(-u / (kBumpSupport * kBumpSupport));
        if (uniform01(rng) * envelope < target) break;
      }
    }
    int a = 0;
    if (fac.on_x)
      for (int i = 0; i < n; ++i) p.x[i] = f0.center.x[i] + f0.width_x * zeta[a++];
    if (fac.on_v)
      for (int i = 0; i < n; ++i) p.v[i] = f0.center.v[i] + f0.width_v * zeta[a++];
  }
  return p;
}

PhasePoint linear_flow(double t, const PhasePoint& p) {
  if (!std::isfinite(t)) throw NumericalError("linear_flow: non-finite time");
  if (std::abs(t) > 700.0) throw NumericalError("linear_flow: horizon too large (|t| > 700)");
  const double c = std::cosh(t), s = std::sinh(t);
  PhasePoint q = PhasePoint::zero(p.dim);
  for (int i = 0; i < p.dim; ++i) {
    q.x[i] = p.x[i] * c + p.v[i] * s;
    q.v[i] = p.x[i] * s + p.v[i] * c;
  }
  return q;
}

double eval_linear_solution(const InitialData& f0, double t, const PhasePoint& p) {
  return f0.value(linear_flow(-t, p));
}

std::vector<double> hamiltonian_invariants(const PhasePoint& p) {
  std::vector<double> h(p.dim);
  for (int i = 0; i < p.dim; ++i) h[i] = 0.5 * p.v[i] * p.v[i] - 0.5 * p.x[i] * p.x[i];
  return h;
}

VelocityBox preimage_box(const InitialData& f0, double t, const Vec& x) {
  VelocityBox box;
  const int n = f0.dim();
  const double c = std::cosh(t), s = std::sinh(t);
  const double rx = f0.support_radius_x(), rv = f0.support_radius_v();
  for (int d = 0; d < n; ++d) {
    // v0 = v cosh t - x sinh t must lie within rv of the velocity centre.
    double lo = (x[d] * s + f0.center.v[d] - rv) / c;
    double hi = (x[d] * s + f0.center.v[d] + rv) / c;
    if (s > 0.0) {
      // x0 = x cosh t - v sinh t must lie within rx of the spatial centre.
      lo = std::max(lo, (x[d] * c - f0.center.x[d] - rx) / s);
      hi = std::min(hi, (x[d] * c - f0.center.x[d] + rx) / s);
    }
    if (!(hi > lo)) {
      box.empty = true;
      return box;
    }
    box.lo[d] = lo;
    box.hi[d] = hi;
  }
  return box;
}

GridField linear_density_on_grid(const InitialData& f0, double t, const SimConfig& cfg, const VelocityQuadrature& q,
                                 Exec exec) {
  if (t < 0.0) throw Error("linear_density_on_grid: t must be non-negative");
  f0.validate();
  const GridSpec spec = grid_at(t, cfg);
  return velocity_integral(
      f0, t, spec, [&](const PhasePoint&, const PhasePoint& z0) { return f0.value(z0); }, q, exec);
}

}  // namespace vptrap
