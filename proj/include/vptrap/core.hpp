#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vptrap {

inline constexpr int kMaxDim = 3;
using Vec = std::array<double, kMaxDim>;

// Error hierarchy. The CLI maps ConfigError to exit code 2 and
// NumericalError (and subclasses) to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Position-velocity pair in R^n x R^n, n in {2,3}. Unused trailing
/// components are kept at zero.
struct PhasePoint {
  int dim = 2;
  Vec x{};
  Vec v{};

  static PhasePoint make(std::span<const double> x, std::span<const double> v);
  static PhasePoint zero(int dim);

  bool finite() const;
  /// Euclidean norm on R^{2n}.
  double norm() const;

  bool operator==(const PhasePoint&) const = default;
};

void check_dim(int dim);

struct SimConfig {
  int dim = 2;
  int mu = 1;
  double eps = 0.01;
  std::int64_t n_particles = 20000;
  double dt = 0.05;
  double t_max = 5.0;
  double softening = 0.0;  // 0 selects one cell width at the current time
  double grid_radius0 = 2.5;
  int grid_cells = 64;
  std::uint64_t seed = 1;
  int snapshot_stride = 1;

  bool operator==(const SimConfig&) const = default;
};

using RawConfig = std::map<std::string, std::string>;

/// Defaults every missing key and validates the result. Unknown keys and
/// out-of-domain values throw ConfigError.
SimConfig validate_config(const RawConfig& raw);

/// Inverse of validate_config for valid configs (used for round trips and
/// for echoing the effective configuration).
RawConfig to_raw(const SimConfig& cfg);

/// Parses flat `key=value` lines; `#` starts a comment.
RawConfig parse_config_text(std::string_view text);
RawConfig read_config_file(const std::string& path);
/// Applies one `key=value` override in place.
void apply_override(RawConfig& raw, std::string_view key_value);

/// Half-width of the co-expanding grid box at time t: R0 * e^t.
double grid_scale(double t, double radius0);
double grid_scale(double t, const SimConfig& cfg);

/// Force softening length at time t (explicit value or one cell width).
double softening_at(double t, const SimConfig& cfg);

struct DecaySeries {
  std::vector<double> times;
  std::vector<double> values;

  DecaySeries() = default;
  DecaySeries(std::vector<double> t, std::vector<double> v);
  void push_back(double t, double v);
  std::size_t size() const { return times.size(); }
};

/// Uniform cell-centred grid on the box [-scale, scale]^dim. Node i along an
/// axis sits at rescaled coordinate xi_i = -1 + (i + 1/2) * 2/cells; the
/// physical coordinate is scale * xi. Linear node index is row-major with
/// the last axis fastest.
struct GridSpec {
  int dim = 2;
  int cells = 64;
  double scale = 1.0;

  std::size_t nodes() const;
  double rescaled_spacing() const { return 2.0 / cells; }
  double cell_width() const { return scale * rescaled_spacing(); }
  double cell_volume() const;
  double xi(int i) const { return -1.0 + (i + 0.5) * rescaled_spacing(); }
  double coord(int i) const { return scale * xi(i); }

  std::array<int, kMaxDim> unravel(std::size_t idx) const;
  std::size_t ravel(const std::array<int, kMaxDim>& ijk) const;
  Vec position(std::size_t idx) const;
  /// True when every index is at least `band` nodes away from the edges.
  bool interior(std::size_t idx, int band) const;
};

GridSpec grid_at(double t, const SimConfig& cfg);

/// Scalar (components == 1) or vector (components == dim) field sampled on a
/// GridSpec; storage is node-major, component-minor.
struct GridField {
  GridSpec spec;
  int components = 1;
  double time = 0.0;
  std::vector<double> data;

  static GridField scalar(const GridSpec& spec, double time = 0.0);
  static GridField vector(const GridSpec& spec, double time = 0.0);

  double& at(std::size_t node, int c = 0) { return data[node * components + c]; }
  double at(std::size_t node, int c = 0) const { return data[node * components + c]; }
  /// Euclidean magnitude at a node (absolute value for scalars).
  double magnitude(std::size_t node) const;
  double sup_magnitude() const;
  /// Integral over the box by the cell-centred midpoint rule (scalars).
  double integral() const;
};

}  // namespace vptrap
