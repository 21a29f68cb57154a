#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vptrap/dynamics.hpp"
#include "vptrap/history.hpp"

namespace vptrap {

/// Everything the trapped-set computations share: a frozen force field, the
/// horizon T_max of the teleological integral, and the step size.
struct TrappedContext {
  const ForceSampler* field = nullptr;
  double t_max = 5.0;
  int mu = 1;
  double dt = 0.05;

  static TrappedContext from_history(const HistoryForce& F, const FieldHistory& h, const SimConfig& cfg);
  int dim() const { return field->dim(); }
};

/// Thrown when a characteristic leaves the field's support box while still
/// growing; carries the exit time.
class EscapeError : public NumericalError {
 public:
  EscapeError(const std::string& what, double t) : NumericalError(what), exit_time(t) {}
  double exit_time;
};

/// phi_map(x, v) = int_0^{T_max} e^{-t} mu grad phi(t, X(t)) dt along the
/// characteristic from (x, v), trapezoid rule on the integration steps. The
/// tail beyond T_max is dropped.
Vec phi_map(const PhasePoint& p, const TrappedContext& ctx);

/// x + v - phi_map(x, v).
Vec psi_defect(const PhasePoint& p, const TrappedContext& ctx);

struct ManifoldPoint {
  PhasePoint p;
  Vec phi{};
  double defect = 0.0;     // max-norm of psi_defect at p
  int iterations = 0;
  double contraction = 0.0;  // largest ratio of successive Picard increments
  bool converged = false;
  std::string error;
};

struct PicardOptions {
  double tol = 1e-10;
  int max_iter = 100;
};

/// v <- -x + phi_map(x, v), from v = -x unless `v_start` is given, until
/// successive iterates differ by less than tol in max-norm.
ManifoldPoint solve_trapped_velocity(const Vec& x, const TrappedContext& ctx, const PicardOptions& opt = {},
                                     const std::optional<Vec>& v_start = std::nullopt);

/// Uniform k^n grid of x on [-half_width, half_width]^n.
std::vector<Vec> manifold_grid(int dim, int per_axis, double half_width);

/// solve_trapped_velocity over the grid; failures are recorded per point.
std::vector<ManifoldPoint> sample_manifold(const std::vector<Vec>& xs, const TrappedContext& ctx,
                                           const PicardOptions& opt = {}, Exec exec = Exec::Parallel);

/// Flows m.p forward by dt_shift and returns the max-norm defect against the
/// history shifted by dt_shift (horizon T_max - dt_shift).
double invariance_check(const ManifoldPoint& m, const TrappedContext& ctx, double dt_shift);

struct EscapeResult {
  double escape_time = 0.0;  // first crossing of ||(X,V)|| = radius
  double growth_slope = 0.0;  // d log||(X,V)|| / dt over the last e-fold
};

/// Perturbs v by delta along e_1 and integrates (zero field past the
/// history) until the Euclidean norm on R^{2n} exceeds `radius`.
EscapeResult escape_test(const ManifoldPoint& m, double delta, const TrappedContext& ctx, double horizon = 20.0,
                         double radius = 10.0);

struct TrajectoryBounds {
  double max_norm = 0.0;              // max_t ||(X,V)(t)|| on [0, T_max]
  bool eventually_decreasing = true;  // ||(X,V)|| non-increasing on [1, T_max - 1]
  double max_tangent_ratio = 0.0;     // max_t max|dX/d(x,v)| / ((1 + 2 sqrt(eps)) e^t)
};

TrajectoryBounds trajectory_bounds(const PhasePoint& p, const TrappedContext& ctx, double eps);

/// Largest |phi_map(x, v + d e_b) - phi_map(x, v)|_inf / d over b.
double picard_lipschitz(const ManifoldPoint& m, const TrappedContext& ctx, double d = 1e-4);

/// Header x1..xn,v1..vn,phi1..phin,defect,iters.
void write_manifold_csv(std::ostream& os, const std::vector<ManifoldPoint>& pts);

}  // namespace vptrap
