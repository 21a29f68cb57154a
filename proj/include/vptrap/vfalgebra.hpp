#pragma once

#include <map>
#include <string>
#include <vector>

#include "vptrap/core.hpp"
#include "vptrap/linear.hpp"
#include "vptrap/matrix.hpp"
#include "vptrap/parallel.hpp"

namespace vptrap {

enum class FieldKind { U, S, L, R };
enum class Scope { Microscopic, Macroscopic };

/// One of U_i, S_i, L, R_ij (indices 1-based, i < j for R). Microscopic
/// fields act on (x, v), macroscopic ones on x only.
struct VectorFieldId {
  FieldKind kind = FieldKind::L;
  int i = 0;
  int j = 0;
  int dim = 2;
  Scope scope = Scope::Microscopic;

  static VectorFieldId U(int i, int dim, Scope s = Scope::Microscopic);
  static VectorFieldId S(int i, int dim, Scope s = Scope::Microscopic);
  static VectorFieldId Lf(int dim, Scope s = Scope::Microscopic);
  static VectorFieldId R(int i, int j, int dim, Scope s = Scope::Microscopic);

  bool stable() const { return kind == FieldKind::S; }
  VectorFieldId with_scope(Scope s) const;
  std::string name() const;  // "U1", "S2", "L", "R12"

  auto operator<=>(const VectorFieldId&) const = default;
};

/// The full family {U_i, S_i, L, R_ij}, in that order.
std::vector<VectorFieldId> all_fields(int dim, Scope s = Scope::Microscopic);
/// The non-stable family {U_i, L, R_ij} used by the weighted Sobolev bound.
std::vector<VectorFieldId> unstable_family(int dim, Scope s = Scope::Microscopic);

/// Integer combination of fields. Zero coefficients are never stored; an
/// R(j, i) term with j > i is folded into -R(i, j).
struct FieldCombination {
  std::map<VectorFieldId, int> terms;

  void add(const VectorFieldId& id, int coeff);
  void add_r(int i, int j, int dim, Scope s, int coeff);
  FieldCombination& operator+=(const FieldCombination& o);
  FieldCombination operator-() const;
  bool zero() const { return terms.empty(); }
  std::string str() const;

  bool operator==(const FieldCombination&) const = default;
};

/// Lie bracket [a, b] = ab - ba.
FieldCombination commute(const VectorFieldId& a, const VectorFieldId& b);
/// Linear extension of commute to combinations.
FieldCombination commute(const FieldCombination& a, const VectorFieldId& b);
FieldCombination commute(const FieldCombination& a, const FieldCombination& b);

/// The microscopic field at time t as an affine map z -> A z + b on R^{2n}
/// (coordinates x_1..x_n, v_1..v_n). Macroscopic fields give the same map
/// with v rows zeroed.
struct AffineField {
  PhaseMatrix A;
  PhaseVector b;
  PhaseVector at(const PhaseVector& z) const { return A * z + b; }
};
AffineField affine_field(const VectorFieldId& z, double t);

PhaseVector to_vector(const PhasePoint& p);
PhasePoint from_vector(const PhaseVector& z, int dim);

/// Z_1 Z_2 ... Z_k g evaluated at a point, given derivatives of g up to
/// order k (k <= 3). Fields are applied right to left.
double apply_composition(const std::vector<AffineField>& fields, const PhaseDerivs& d, const PhaseVector& z);

/// Sum of |Z^a g| over every ordered word of length <= max_len (<= 3) drawn
/// from `family`, sharing intermediate products across words.
double sum_abs_compositions(const std::vector<AffineField>& family, const PhaseDerivs& d, const PhaseVector& z,
                            int max_len);

/// 4th-order finite-difference gradient of a scalar grid field in physical
/// coordinates; one-sided stencils in the two-node boundary band.
GridField fd_gradient(const GridField& g, Exec exec = Exec::Parallel);
/// Same stencil along one axis only.
GridField fd_partial(const GridField& g, int axis, Exec exec = Exec::Parallel);

/// Macroscopic field applied to a scalar grid field at time t.
GridField apply_macroscopic(const VectorFieldId& z, const GridField& g, double t, Exec exec = Exec::Parallel);

/// Sup over interior nodes of | |x|^2 d_j g - sum_i x^i R_ij g - x^j L g |
/// (j 1-based).
double weight_decomposition_check(int j, const GridField& g, Exec exec = Exec::Parallel);

struct CommutationOptions {
  VelocityQuadrature quadrature{};
  bool omit_n_term = false;  // mutation switch for the L identity
  int band = 2;
};

struct CommutationResult {
  double residual = 0.0;   // sup over interior nodes
  double sup_rho = 0.0;
};

/// Compares Z^x rho(f) with rho(Z f) (+ n rho for L) for the explicit
/// linear solution at time t on the cfg grid.
CommutationResult density_commutation_check(const InitialData& f0, const VectorFieldId& z, double t,
                                            const SimConfig& cfg, const CommutationOptions& opt = {},
                                            Exec exec = Exec::Parallel);
/// Same check for several fields sharing one density and one quadrature pass.
std::vector<CommutationResult> density_commutation_checks(const InitialData& f0, const std::vector<VectorFieldId>& zs,
                                                          double t, const SimConfig& cfg,
                                                          const CommutationOptions& opt = {},
                                                          Exec exec = Exec::Parallel);

struct SobolevOptions {
  VelocityQuadrature quadrature{};
  int quadrature_nodes = 40;           // per axis, 2D phase-space quadrature
  std::int64_t mc_samples = 20000;     // 3D Monte Carlo denominator
  std::uint64_t seed = 7;
};

struct SobolevParts {
  double numerator = 0.0;    // sup_x (e^t + |x|)^n rho(t, x)
  double denominator = 0.0;  // sum of ||Z^a f0||_L1, |a| <= n, Z in the unstable family
  double ratio = 0.0;
};

/// Sum over ordered compositions from the unstable family of length <= n of
/// ||Z^a f0||_L1 at t = 0.
double sobolev_denominator(const InitialData& f0, const SobolevOptions& opt = {}, Exec exec = Exec::Parallel);
SobolevParts sobolev_ratio(const InitialData& f0, double t, const SimConfig& cfg, const SobolevOptions& opt = {},
                           Exec exec = Exec::Parallel);

}  // namespace vptrap
