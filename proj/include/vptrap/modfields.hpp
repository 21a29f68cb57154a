#pragma once

#include <iosfwd>
#include <vector>

#include "vptrap/history.hpp"
#include "vptrap/kinetic.hpp"
#include "vptrap/vfalgebra.hpp"

namespace vptrap {

struct ModSourceOptions {
  bool omit_c_term = false;  // mutation switch: drop the -2 phi correction for L
};

/// The non-stable base fields U1, U2, L, R12 carrying modification
/// coefficients (2D only).
std::vector<VectorFieldId> modified_base_fields();

/// -(mu/2) e^t d_k (Z^x phi + c phi), c = -2 for L and 0 otherwise, on the
/// grid of `phi` (scalar). k is 1-based. Stable Z throws.
GridField modified_source(const VectorFieldId& z, const GridField& phi, double t, int k, int mu,
                          const ModSourceOptions& opt = {}, Exec exec = Exec::Parallel);

/// First-order modification coefficients phi^k_i(t) along characteristics.
/// values and grad_norms are indexed [time][particle][field][k-1].
struct ModCoefficients {
  std::vector<double> times;
  std::vector<VectorFieldId> fields;
  std::size_t particles = 0;
  std::vector<double> values;
  /// Euclidean norm of the (x, v)-gradient of each coefficient at time t,
  /// from the finite-difference bundle.
  std::vector<double> grad_norms;
  /// Same for the x-gradient alone.
  std::vector<double> grad_x_norms;
  /// Norm of the gradient with respect to the initial point (x0, v0).
  std::vector<double> grad_initial_norms;

  std::size_t index(std::size_t ti, std::size_t p, std::size_t f, int k) const {
    return ((ti * particles + p) * fields.size() + f) * 2 + static_cast<std::size_t>(k - 1);
  }
  double value(std::size_t ti, std::size_t p, std::size_t f, int k) const { return values[index(ti, p, f, k)]; }
  /// max over particles of |phi^k_f(t_i)|.
  std::vector<double> envelope(std::size_t f, int k) const;
};

struct TransportOptions {
  ModSourceOptions source{};
  bool bundle = true;         // track 4 offset characteristics per particle for gradients
  double bundle_offset = 1e-4;  // times the grid scale at t = 0
  Exec exec = Exec::Parallel;
};

/// Integrates d phi / dt = source(t, X(t)) from phi(0) = 0 by the trapezoid
/// rule on the history's snapshot times, with characteristics driven by the
/// recorded forces. The history must carry potentials.
ModCoefficients transport_coefficients(const std::vector<PhasePoint>& starts, const FieldHistory& h, int mu,
                                       const SimConfig& cfg, const TransportOptions& opt = {});

struct BootstrapMargins {
  double b2 = 0.0;  // max |phi| / (eps^{1/2} (1 + t))
  double b3 = 0.0;  // max |grad phi| / eps^{1/2}
  double b4 = 0.0;  // max sup|grad phi_field| e^t / eps^{1/2}
  // b3 with the x-gradient only and with the gradient in initial
  // coordinates; diagnostics, not part of pass()
  double b3_x = 0.0;
  double b3_initial = 0.0;
  double b3_crossing = -1.0;  // first snapshot time with |grad phi| / eps^{1/2} >= 1, or -1
  bool pass() const { return b2 < 1.0 && b3 < 1.0 && b4 < 1.0; }
};

/// Margins at |alpha| = 0. b3 is 0 when the coefficients carry no gradients.
BootstrapMargins bootstrap_check(const ModCoefficients& c, const DiagnosticsReport& report, double eps);

/// Least-squares slope of the envelope max_p |phi^k_f(t)| against t, for
/// every (field, k); returned in field-major order.
std::vector<double> coefficient_growth_slopes(const ModCoefficients& c);

/// Header t,particle_id,base_field,k,phi_value.
void write_coefficients_csv(std::ostream& os, const ModCoefficients& c);

}  // namespace vptrap
