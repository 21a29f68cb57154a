#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "vptrap/core.hpp"
#include "vptrap/matrix.hpp"
#include "vptrap/poisson.hpp"

namespace vptrap {

/// d(X,V)/d(x,v) along a characteristic, 2n x 2n.
using TangentMap = PhaseMatrix;
using ForceJacobian = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

TangentMap identity_tangent(int dim);

/// Black-box force field grad phi(t, x). Implementations must be safe for
/// concurrent read-only calls.
class ForceSampler {
 public:
  virtual ~ForceSampler() = default;
  virtual int dim() const = 0;
  virtual Vec force(double t, const Vec& x) const = 0;
  /// Spatial scale of the field at time t; the force Jacobian is taken by
  /// central differences with offset 1e-4 * length_scale(t).
  virtual double length_scale(double /*t*/) const { return 1.0; }
  /// Half-width of the box outside which the field is zero by construction.
  virtual double support_radius(double /*t*/) const { return std::numeric_limits<double>::infinity(); }
};

class ZeroForce final : public ForceSampler {
 public:
  explicit ZeroForce(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  Vec force(double, const Vec&) const override { return {}; }

 private:
  int dim_;
};

/// Spatially and temporally constant field.
class ConstantForce final : public ForceSampler {
 public:
  ConstantForce(int dim, const Vec& f) : dim_(dim), f_(f) {}
  int dim() const override { return dim_; }
  Vec force(double, const Vec&) const override { return f_; }

 private:
  int dim_;
  Vec f_;
};

/// Frozen point sources summed directly; zero beyond `support_radius`.
class SourceForce final : public ForceSampler {
 public:
  SourceForce(SourceSet sources, double softening,
              double support_radius = std::numeric_limits<double>::infinity());
  int dim() const override { return src_.dim; }
  Vec force(double t, const Vec& x) const override;
  double support_radius(double) const override { return support_; }

 private:
  SourceSet src_;
  double soft2_;
  double support_;
};

/// One vector GridField frozen in time, multilinear in the rescaled
/// coordinate; zero outside the grid box.
class GridForce final : public ForceSampler {
 public:
  explicit GridForce(GridField field);
  int dim() const override { return field_.spec.dim; }
  Vec force(double t, const Vec& x) const override;
  double length_scale(double) const override { return field_.spec.scale; }
  double support_radius(double) const override { return field_.spec.scale; }

 private:
  GridField field_;
};

/// Multilinear interpolation of a vector GridField at physical point x;
/// zero outside [-scale, scale]^n, nearest-cell extension in the half cell
/// beyond the outermost nodes.
Vec interpolate_vector(const GridField& g, const Vec& x);

/// The base sampler evaluated at t + shift.
class ShiftedForce final : public ForceSampler {
 public:
  ShiftedForce(const ForceSampler& base, double shift) : base_(base), shift_(shift) {}
  int dim() const override { return base_.dim(); }
  Vec force(double t, const Vec& x) const override { return base_.force(t + shift_, x); }
  double length_scale(double t) const override { return base_.length_scale(t + shift_); }
  double support_radius(double t) const override { return base_.support_radius(t + shift_); }

 private:
  const ForceSampler& base_;
  double shift_;
};

struct ForceEval {
  Vec f{};
  ForceJacobian jac;  // empty unless requested
};

/// Force and (optionally) its x-Jacobian at (t, x). Non-finite values throw
/// NumericalError naming (t, x).
ForceEval evaluate_force(const ForceSampler& F, double t, const Vec& x, bool with_jacobian);

/// v <- v - tau mu F; J <- [[I,0],[-tau mu DF, I]] J.
void kick(PhasePoint& p, TangentMap* J, const ForceEval& e, double tau, int mu);
/// Exact linear flow over h; J <- [[c I, s I],[s I, c I]] J.
void drift(PhasePoint& p, TangentMap* J, double h);

/// Kick-drift-kick step from t to t + h. When `start` is given it must be
/// the force at (t, p.x) (with Jacobian if J is set); the force at the end
/// point is returned so that callers can reuse it.
ForceEval strang_step(PhasePoint& p, TangentMap* J, double t, double h, int mu, const ForceSampler& F,
                      const ForceEval* start = nullptr);

struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> points;
  std::vector<TangentMap> tangents;  // empty without tangent tracking
};

/// Called at every step node (t_0 first) with the force the kicks use
/// there. Returning false stops the integration after that node.
using StepVisitor = std::function<bool(double t, const PhasePoint& p, const TangentMap* J, const Vec& force)>;

struct WalkResult {
  double t = 0.0;
  PhasePoint p;
  TangentMap J;
  bool stopped = false;
};

/// Fixed steps t_0 + k dt, the last one shortened to land on t1.
WalkResult walk_characteristic(const PhasePoint& p0, double t0, double t1, double dt, int mu, const ForceSampler& F,
                               bool with_tangent, const StepVisitor& visit);

/// Samples every cfg.snapshot_stride steps plus the end point.
Trajectory integrate_characteristic(const PhasePoint& p0, double t0, double t1, const SimConfig& cfg,
                                    const ForceSampler& F, bool with_tangent);

struct DuhamelResidual {
  Vec unstable{};  // max_t |X+V + e^t int e^{-t'} mu F - e^t (x+v)| e^{-t}
  Vec stable{};    // max_t |X-V - e^{-t} int e^{t'} mu F - e^{-t} (x-v)| e^{t}
};

/// Both Duhamel identities on the trajectory samples, trapezoid rule in time
/// on the samples, with the force re-evaluated from F at (t_k, X_k).
DuhamelResidual duhamel_residual(const Trajectory& traj, int mu, const ForceSampler& F);

}  // namespace vptrap
