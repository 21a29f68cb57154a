#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "vptrap/core.hpp"
#include "vptrap/parallel.hpp"

namespace vptrap {

enum class InitialKind {
  Gaussian,  // isotropic gaussian in x and in v
  Bump,      // smooth radial bump on the scaled phase space, support radius 3
  Product,   // gaussian in x times a smooth bump in v
};

/// Closed-form initial distribution f0. Every kind is normalised so that the
/// total mass equals `amplitude`.
struct InitialData {
  InitialKind kind = InitialKind::Gaussian;
  double amplitude = 0.01;
  PhasePoint center;
  double width_x = 0.5;
  double width_v = 0.5;

  void validate() const;
  int dim() const { return center.dim; }
  double mass() const { return amplitude; }
  double value(const PhasePoint& z) const;
  /// Half-width of the axis-aligned box that contains the support (for the
  /// gaussian factors: eight widths, beyond which f0 is below 1e-14 of its
  /// peak).
  double support_radius_x() const;
  double support_radius_v() const;
};

InitialData make_initial(InitialKind kind, int dim, double amplitude, double width_x = 0.5, double width_v = 0.5);

/// Value, gradient, Hessian and third-derivative tensor of f0 with respect to
/// z = (x, v) in R^{2n}; coordinates ordered x_1..x_n, v_1..v_n.
struct PhaseDerivs {
  int m = 4;  // 2n
  double value = 0.0;
  std::array<double, 6> grad{};
  std::array<double, 36> hess{};
  std::array<double, 216> third{};

  double h(int a, int b) const { return hess[a * 6 + b]; }
  double t3(int a, int b, int c) const { return third[(a * 6 + b) * 6 + c]; }
};

PhaseDerivs derivatives(const InitialData& f0, const PhasePoint& z, int order);

/// Cheaper first-order path used inside quadrature and Monte Carlo loops.
struct PhaseGrad {
  double value = 0.0;
  std::array<double, 6> grad{};
};
PhaseGrad value_and_gradient(const InitialData& f0, const PhasePoint& z);

/// Draws one phase point from f0 / mass. Gaussian factors use the inverse
/// CDF, bump factors use rejection; `proposals` counts rejection attempts.
PhasePoint draw_phase_point(const InitialData& f0, std::mt19937_64& rng, std::uint64_t& proposals);
double uniform01(std::mt19937_64& rng);

/// Exact linear characteristic flow over time t (negative t flows backward).
PhasePoint linear_flow(double t, const PhasePoint& p);

/// f(t, p) = f0(linear_flow(-t, p)).
double eval_linear_solution(const InitialData& f0, double t, const PhasePoint& p);

/// Per-axis Hamiltonians H^i = (v^i)^2/2 - (x^i)^2/2.
std::vector<double> hamiltonian_invariants(const PhasePoint& p);

struct VelocityQuadrature {
  int nodes_per_axis = 64;
  double budget = 4e10;  // maximum integrand evaluations per grid
};

/// Axis-aligned velocity box whose backward image under the linear flow
/// covers the support of f0, for a fixed spatial point x.
struct VelocityBox {
  bool empty = false;
  Vec lo{};
  Vec hi{};
};
VelocityBox preimage_box(const InitialData& f0, double t, const Vec& x);

/// K velocity integrals int g_k(z, z0) dv at every node of `spec`, where
/// z = (x, v) and z0 = linear_flow(-t, z). The integrand writes all K values
/// into its third argument. Tensor midpoint rule over the preimage box.
template <int K, class Integrand>
std::array<GridField, K> velocity_integrals(const InitialData& f0, double t, const GridSpec& spec, Integrand&& g,
                                            const VelocityQuadrature& q = {}, Exec exec = Exec::Parallel) {
  const int n = spec.dim;
  const int qn = q.nodes_per_axis;
  const double evals = static_cast<double>(spec.nodes()) * std::pow(static_cast<double>(qn), n);
  if (evals > q.budget) throw NumericalError("velocity quadrature budget exceeded");
  std::array<GridField, K> out;
  for (auto& o : out) o = GridField::scalar(spec, t);
  const long long total = static_cast<long long>(spec.nodes());
  const double c = std::cosh(t), s = std::sinh(t);

  auto node_value = [&](std::size_t idx) {
    PhasePoint z = PhasePoint::zero(n);
    z.x = spec.position(idx);
    const VelocityBox box = preimage_box(f0, t, z.x);
    if (box.empty) return;
    Vec dv{};
    double cell = 1.0;
    for (int d = 0; d < n; ++d) {
      dv[d] = (box.hi[d] - box.lo[d]) / qn;
      cell *= dv[d];
    }
    std::array<double, K> sum{}, val{};
    std::array<int, kMaxDim> k{};
    PhasePoint z0 = PhasePoint::zero(n);
    for (;;) {
      for (int d = 0; d < n; ++d) {
        z.v[d] = box.lo[d] + (k[d] + 0.5) * dv[d];
        z0.x[d] = z.x[d] * c - z.v[d] * s;
        z0.v[d] = z.v[d] * c - z.x[d] * s;
      }
      g(z, z0, val);
      for (int j = 0; j < K; ++j) sum[j] += val[j];
      int d = n - 1;
      while (d >= 0 && ++k[d] == qn) k[d--] = 0;
      if (d < 0) break;
    }
    for (int j = 0; j < K; ++j) out[j].data[idx] = sum[j] * cell;
  };

  if (exec == Exec::Serial) {
    for (long long i = 0; i < total; ++i) node_value(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < total; ++i) node_value(static_cast<std::size_t>(i));
  }
  return out;
}

/// Single velocity integral int g(z, z0) dv; see velocity_integrals.
template <class Integrand>
GridField velocity_integral(const InitialData& f0, double t, const GridSpec& spec, Integrand&& g,
                            const VelocityQuadrature& q = {}, Exec exec = Exec::Parallel) {
  auto wrapped = [&](const PhasePoint& z, const PhasePoint& z0, std::array<double, 1>& out) { out[0] = g(z, z0); };
  return velocity_integrals<1>(f0, t, spec, wrapped, q, exec)[0];
}

/// Spatial density of the explicit linear solution on the time-t grid.
GridField linear_density_on_grid(const InitialData& f0, double t, const SimConfig& cfg,
                                 const VelocityQuadrature& q = {}, Exec exec = Exec::Parallel);

}  // namespace vptrap
