#pragma once

#include <vector>

#include "vptrap/core.hpp"
#include "vptrap/parallel.hpp"

namespace vptrap {

/// Weighted point sources carrying a discrete density.
struct SourceSet {
  int dim = 2;
  std::vector<Vec> positions;
  std::vector<double> weights;

  void validate() const;
  std::size_t size() const { return positions.size(); }
  double total_weight() const;
};

/// Gradient of the (softened) free-space Green function of the Laplacian at
/// offset d, for unit source weight:
///   n = 2: d / (2 pi (|d|^2 + eps^2))
///   n = 3: d / (4 pi (|d|^2 + eps^2)^{3/2})
Vec green_gradient(int dim, const Vec& d, double soft2);
/// Matching potential: (1/4 pi) log(|d|^2 + eps^2) in 2D,
/// -1 / (4 pi sqrt(|d|^2 + eps^2)) in 3D.
double green_potential(int dim, const Vec& d, double soft2);

/// grad phi at each target for Delta phi = sum_p w_p delta(x - x_p).
/// Sources are accumulated in their stored order for every target.
std::vector<Vec> pairwise_force(const std::vector<Vec>& targets, const SourceSet& sources, double softening,
                                Exec exec = Exec::Parallel);

/// Midpoint-rule convolution of a grid density with the softened force
/// kernel, evaluated at every node. Nodes with zero density are skipped.
GridField grid_force_from_density(const GridField& rho, double softening, Exec exec = Exec::Parallel);
/// Softening of one cell width.
GridField grid_force_from_density(const GridField& rho, Exec exec = Exec::Parallel);
/// Same convolution with the softened potential kernel (scalar field).
GridField grid_potential_from_density(const GridField& rho, double softening, Exec exec = Exec::Parallel);

struct KernelQuadrature {
  double value = 0.0;
  double error = 0.0;  // estimated absolute error
};

/// int_{R^n} dy / (|y|^{n-1} (1 + |x + y|)^n) by adaptive polar quadrature
/// (Gauss-Kronrod in the radius, split at max(1, |x|), and in the polar
/// angle). Throws NumericalError when the relative tolerance is not met.
KernelQuadrature kernel_bound_quadrature(int n, const Vec& x, double rel_tol = 1e-4);

/// int dy / (|y|^{n-1} (e^t + |x - y|)^n) computed directly, checked against
/// e^{-(n-1)t} * kernel_bound_quadrature(n, x / e^t) to 1e-3 relative.
double scaled_kernel_decay(int n, double t, const Vec& x);

}  // namespace vptrap
