#include "vptrap/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace vptrap {

void SourceSet::validate() const {
  check_dim(dim);
  if (positions.size() != weights.size()) throw Error("source set: positions and weights differ in length");
  for (std::size_t p = 0; p < size(); ++p) {
    if (!(weights[p] >= 0.0) || !std::isfinite(weights[p])) throw Error("source set: weights must be finite and non-negative");
    for (int a = 0; a < dim; ++a)
      if (!std::isfinite(positions[p][a])) throw Error("source set: non-finite position");
  }
}

double SourceSet::total_weight() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

Vec green_gradient(int dim, const Vec& d, double soft2) {
  double r2 = soft2;
  for (int a = 0; a < dim; ++a) r2 += d[a] * d[a];
  Vec g{};
  if (r2 == 0.0) return g;
  double k;
  if (dim == 2) k = 1.0 / (2.0 * std::numbers::pi * r2);
  else k = 1.0 / (4.0 * std::numbers::pi * r2 * std::sqrt(r2));
  for (int a = 0; a < dim; ++a) g[a] = k * d[a];
  return g;
}

double green_potential(int dim, const Vec& d, double soft2) {
  double r2 = soft2;
  for (int a = 0; a < dim; ++a) r2 += d[a] * d[a];
  if (r2 == 0.0) throw NumericalError("green_potential: singular evaluation at zero offset");
  if (dim == 2) return std::log(r2) / (4.0 * std::numbers::pi);
  return -1.0 / (4.0 * std::numbers::pi * std::sqrt(r2));
}

std::vector<Vec> pairwise_force(const std::vector<Vec>& targets, const SourceSet& src, double softening, Exec exec) {
  src.validate();
  if (!(softening >= 0.0)) throw Error("pairwise_force: softening must be non-negative");
  const int n = src.dim;
  const double soft2 = softening * softening;
  const std::size_t ns = src.size();
  std::vector<Vec> out(targets.size());

  // Structure-of-arrays copy of the sources for a contiguous inner loop.
  std::vector<double> sx(ns), sy(ns), sz(ns, 0.0), sw(ns);
  for (std::size_t p = 0; p < ns; ++p) {
    sx[p] = src.positions[p][0];
    sy[p] = src.positions[p][1];
    if (n == 3) sz[p] = src.positions[p][2];
    sw[p] = src.weights[p];
  }
  const double c2 = 1.0 / (2.0 * std::numbers::pi), c3 = 1.0 / (4.0 * std::numbers::pi);
  bool singular = false;

  auto one = [&](std::size_t i) {
    const double tx = targets[i][0], ty = targets[i][1], tz = n == 3 ? targets[i][2] : 0.0;
    double fx = 0.0, fy = 0.0, fz = 0.0;
    for (std::size_t p = 0; p < ns; ++p) {
      const double dx = tx - sx[p], dy = ty - sy[p], dz = tz - sz[p];
      const double r2 = dx * dx + dy * dy + dz * dz + soft2;
      if (r2 == 0.0) {
        if (sw[p] != 0.0) singular = true;
        continue;
      }
      const double k = n == 2 ? sw[p] * c2 / r2 : sw[p] * c3 / (r2 * std::sqrt(r2));
      fx += k * dx;
      fy += k * dy;
      fz += k * dz;
    }
    out[i] = {fx, fy, n == 3 ? fz : 0.0};
  };

  const long long nt = static_cast<long long>(targets.size());
  if (exec == Exec::Serial) {
    for (long long i = 0; i < nt; ++i) one(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < nt; ++i) one(static_cast<std::size_t>(i));
  }
  if (singular) throw NumericalError("pairwise_force: singular evaluation (target coincides with a source, softening 0)");
  return out;
}

namespace {

// Convolution of a scalar grid density with a kernel tabulated on node
// offsets. `comps` kernels are applied at once; the result has `comps`
// components per node.
GridField grid_convolve(const GridField& rho, int comps, double softening, bool potential, Exec exec) {
  if (rho.components != 1) throw Error("grid convolution expects a scalar density");
  if (!(softening > 0.0)) throw Error("grid convolution requires positive softening");
  const GridSpec& sp = rho.spec;
  const int n = sp.dim;
  const int G = sp.cells;
  const int W = 2 * G - 1;  // offsets -(G-1) .. G-1
  const double h = sp.cell_width();
  const double vol = sp.cell_volume();
  const double soft2 = softening * softening;

  // Kernel table with the last offset axis reversed, so that the innermost
  // loop over source index runs forward through memory.
  const std::size_t rows = n == 2 ? static_cast<std::size_t>(W) : static_cast<std::size_t>(W) * W;
  std::vector<std::vector<double>> table(comps, std::vector<double>(rows * W));
  for (std::size_t r = 0; r < rows; ++r) {
    Vec d{};
    if (n == 2) {
      d[0] = (static_cast<int>(r) - (G - 1)) * h;
    } else {
      d[0] = (static_cast<int>(r / W) - (G - 1)) * h;
      d[1] = (static_cast<int>(r % W) - (G - 1)) * h;
    }
    for (int m = 0; m < W; ++m) {
      d[n - 1] = ((W - 1 - m) - (G - 1)) * h;
      if (potential) {
        table[0][r * W + m] = vol * green_potential(n, d, soft2);
      } else {
        const Vec g = green_gradient(n, d, soft2);
        for (int c = 0; c < comps; ++c) table[c][r * W + m] = vol * g[c];
      }
    }
  }

  // Nonzero extent of each source row (all axes but the last fixed).
  const std::size_t nrows = sp.nodes() / G;
  std::vector<int> lo(nrows, G), hi(nrows, 0);
  std::vector<std::size_t> active;
  for (std::size_t r = 0; r < nrows; ++r) {
    for (int k = 0; k < G; ++k)
      if (rho.data[r * G + k] != 0.0) {
        lo[r] = std::min(lo[r], k);
        hi[r] = k + 1;
      }
    if (hi[r] > lo[r]) active.push_back(r);
  }

  GridField out = potential ? GridField::scalar(sp, rho.time) : GridField::vector(sp, rho.time);
  auto target_row = [&](std::size_t tr) {
    const int ta = n == 2 ? static_cast<int>(tr) : static_cast<int>(tr / G);
    const int tb = n == 2 ? 0 : static_cast<int>(tr % G);
    std::vector<double> acc(static_cast<std::size_t>(comps) * G, 0.0);
    for (std::size_t sr : active) {
      const int sa = n == 2 ? static_cast<int>(sr) : static_cast<int>(sr / G);
      const int sb = n == 2 ? 0 : static_cast<int>(sr % G);
      const std::size_t krow =
          n == 2 ? static_cast<std::size_t>(ta - sa + G - 1)
                 : static_cast<std::size_t>(ta - sa + G - 1) * W + static_cast<std::size_t>(tb - sb + G - 1);
      const double* rrow = &rho.data[sr * G];
      for (int c = 0; c < comps; ++c) {
        const double* kr = &table[c][krow * W];
        for (int tc = 0; tc < G; ++tc) {
          // reversed index of offset tc - sc is (G - 1 - tc) + sc
          const double* k = kr + (G - 1 - tc);
          double s = 0.0;
          for (int sc = lo[sr]; sc < hi[sr]; ++sc) s += rrow[sc] * k[sc];
          acc[static_cast<std::size_t>(c) * G + tc] += s;
        }
      }
    }
    for (int tc = 0; tc < G; ++tc)
      for (int c = 0; c < comps; ++c) out.data[(tr * G + tc) * comps + c] = acc[static_cast<std::size_t>(c) * G + tc];
  };

  const long long nt = static_cast<long long>(nrows);
  if (exec == Exec::Serial) {
    for (long long r = 0; r < nt; ++r) target_row(static_cast<std::size_t>(r));
  } else {
#pragma omp parallel for schedule(dynamic, 4)
    for (long long r = 0; r < nt; ++r) target_row(static_cast<std::size_t>(r));
  }
  return out;
}

}  // namespace

GridField grid_force_from_density(const GridField& rho, double softening, Exec exec) {
  return grid_convolve(rho, rho.spec.dim, softening, false, exec);
}

GridField grid_force_from_density(const GridField& rho, Exec exec) {
  return grid_force_from_density(rho, rho.spec.cell_width(), exec);
}

GridField grid_potential_from_density(const GridField& rho, double softening, Exec exec) {
  return grid_convolve(rho, 1, softening, true, exec);
}

namespace {

// int over the unit sphere and r in (0, inf) of dr / (a + |x + r w|)^n,
// with |x| = rx. The r^{n-1} of the polar measure cancels the weight.
KernelQuadrature polar_integral(int n, double a, double rx, double rel_tol) {
  check_dim(n);
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  constexpr unsigned depth = 12;
  const double inner_tol = 1e-9;
  const double split = std::max(a, rx);
  double inner_err_max = 0.0;

  auto radial = [&](double cos_t) {
    auto f = [&](double r) {
      const double d2 = std::max(0.0, rx * rx + r * r + 2.0 * r * rx * cos_t);
      return std::pow(a + std::sqrt(d2), -n);
    };
    double err = 0.0, total = 0.0;
    std::vector<double> cuts{0.0};
    if (rx > 0.0 && rx < split) cuts.push_back(rx);
    cuts.push_back(split);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      double e = 0.0;
      total += GK::integrate(f, cuts[k], cuts[k + 1], depth, inner_tol, &e);
      err += e;
    }
    double e = 0.0;
    total += GK::integrate(f, split, std::numeric_limits<double>::infinity(), depth, inner_tol, &e);
    err += e;
    inner_err_max = std::max(inner_err_max, err);
    return total;
  };

  KernelQuadrature q;
  double outer_err = 0.0;
  if (rx == 0.0) {
    const double r = radial(1.0);
    const double sphere = n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
    q.value = sphere * r;
    q.error = sphere * inner_err_max;
  } else {
    auto outer = [&](double theta) {
      const double w = n == 2 ? 2.0 : 2.0 * std::numbers::pi * std::sin(theta);
      return w * radial(std::cos(theta));
    };
    q.value = GK::integrate(outer, 0.0, std::numbers::pi, depth, 1e-10, &outer_err);
    const double wmax = n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
    q.error = outer_err * std::abs(q.value) + wmax * inner_err_max;
  }
  if (!(q.error <= rel_tol * std::abs(q.value)) || !std::isfinite(q.value)) {
    std::ostringstream os;
    os << "kernel quadrature did not reach relative tolerance " << rel_tol << " (estimate " << q.value
       << ", error " << q.error << ")";
    throw NumericalError(os.str());
  }
  return q;
}

double norm_of(int n, const Vec& x) {
  double s = 0.0;
  for (int a = 0; a < n; ++a) s += x[a] * x[a];
  return std::sqrt(s);
}

}  // namespace

KernelQuadrature kernel_bound_quadrature(int n, const Vec& x, double rel_tol) {
  return polar_integral(n, 1.0, norm_of(n, x), rel_tol);
}

double scaled_kernel_decay(int n, double t, const Vec& x) {
  if (t < 0.0) throw Error("scaled_kernel_decay: t must be non-negative");
  const double et = std::exp(t);
  const double rx = norm_of(n, x);
  const double direct = polar_integral(n, et, rx, 1e-4).value;
  Vec xs{};
  for (int a = 0; a < n; ++a) xs[a] = x[a] / et;
  const double via = std::exp(-(n - 1) * t) * kernel_bound_quadrature(n, xs).value;
  if (std::abs(direct - via) > 1e-3 * std::abs(via)) {
    std::ostringstream os;
    os << "scaled_kernel_decay: change-of-variables mismatch at t=" << t << " (" << direct << " vs " << via << ")";
    throw NumericalError(os.str());
  }
  return direct;
}

}  // namespace vptrap
