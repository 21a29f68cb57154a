#include "vptrap/core.hpp"
#include "vptrap/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <omp.h>

namespace vptrap {

void set_workers(int k) {
  if (k < 1) throw ConfigError("--workers must be at least 1");
  omp_set_num_threads(k);
}

int workers() { return omp_get_max_threads(); }

void check_dim(int dim) {
  if (dim != 2 && dim != 3) throw ConfigError("dimension must be 2 or 3");
}

PhasePoint PhasePoint::make(std::span<const double> x, std::span<const double> v) {
  if (x.size() != v.size()) throw Error("phase point: x and v lengths differ");
  PhasePoint p;
  p.dim = static_cast<int>(x.size());
  check_dim(p.dim);
  std::copy(x.begin(), x.end(), p.x.begin());
  std::copy(v.begin(), v.end(), p.v.begin());
  if (!p.finite()) throw Error("phase point has non-finite components");
  return p;
}

PhasePoint PhasePoint::zero(int dim) {
  check_dim(dim);
  PhasePoint p;
  p.dim = dim;
  return p;
}

bool PhasePoint::finite() const {
  for (int i = 0; i < dim; ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(v[i])) return false;
  return true;
}

double PhasePoint::norm() const {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += x[i] * x[i] + v[i] * v[i];
  return std::sqrt(s);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("cannot parse value '" + text + "' for key '" + key + "'");
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

RawConfig parse_config_text(std::string_view text) {
  RawConfig raw;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    raw[key] = value;
  }
  return raw;
}

RawConfig read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(RawConfig& raw, std::string_view key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(key_value) + "' is not key=value");
  const std::string key(trim(key_value.substr(0, eq)));
  if (key.empty()) throw ConfigError("override with empty key");
  raw[key] = std::string(trim(key_value.substr(eq + 1)));
}

SimConfig validate_config(const RawConfig& raw) {
  SimConfig cfg;
  for (const auto& [key, value] : raw) {
    if (key == "dim") cfg.dim = parse_number<int>(key, value);
    else if (key == "mu") cfg.mu = parse_number<int>(key, value);
    else if (key == "eps") cfg.eps = parse_number<double>(key, value);
    else if (key == "n_particles") cfg.n_particles = parse_number<std::int64_t>(key, value);
    else if (key == "dt") cfg.dt = parse_number<double>(key, value);
    else if (key == "t_max") cfg.t_max = parse_number<double>(key, value);
    else if (key == "softening") cfg.softening = parse_number<double>(key, value);
    else if (key == "grid_radius0") cfg.grid_radius0 = parse_number<double>(key, value);
    else if (key == "grid_cells") cfg.grid_cells = parse_number<int>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "snapshot_stride") cfg.snapshot_stride = parse_number<int>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }

  check_dim(cfg.dim);
  if (cfg.mu != 1 && cfg.mu != -1) throw ConfigError("mu must be +1 or -1");
  if (!(cfg.eps > 0.0) || !std::isfinite(cfg.eps)) throw ConfigError("eps must be positive");
  if (cfg.eps > 0.1) throw ConfigError("eps=" + format_double(cfg.eps) + " is outside small-data regime (eps <= 0.1)");
  if (cfg.n_particles <= 0) throw ConfigError("n_particles must be positive");
  if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(cfg.dt < 0.1)) throw ConfigError("dt must be below 0.1");
  if (cfg.dt > 0.05) throw ConfigError("dt must not exceed 0.05 (integrator step limit)");
  if (!(cfg.t_max > 0.0) || !std::isfinite(cfg.t_max)) throw ConfigError("t_max must be positive");
  if (cfg.t_max < cfg.dt) throw ConfigError("t_max must be at least dt");
  if (!(cfg.softening >= 0.0)) throw ConfigError("softening must be non-negative");
  if (!(cfg.grid_radius0 > 0.0)) throw ConfigError("grid_radius0 must be positive");
  if (cfg.grid_cells < 16) throw ConfigError("grid_cells must be at least 16");
  if (cfg.snapshot_stride < 1) throw ConfigError("snapshot_stride must be positive");
  return cfg;
}

RawConfig to_raw(const SimConfig& cfg) {
  return {
      {"dim", std::to_string(cfg.dim)},
      {"mu", std::to_string(cfg.mu)},
      {"eps", format_double(cfg.eps)},
      {"n_particles", std::to_string(cfg.n_particles)},
      {"dt", format_double(cfg.dt)},
      {"t_max", format_double(cfg.t_max)},
      {"softening", format_double(cfg.softening)},
      {"grid_radius0", format_double(cfg.grid_radius0)},
      {"grid_cells", std::to_string(cfg.grid_cells)},
      {"seed", std::to_string(cfg.seed)},
      {"snapshot_stride", std::to_string(cfg.snapshot_stride)},
  };
}

double grid_scale(double t, double radius0) { return radius0 * std::exp(t); }
double grid_scale(double t, const SimConfig& cfg) { return grid_scale(t, cfg.grid_radius0); }

double softening_at(double t, const SimConfig& cfg) {
  if (cfg.softening > 0.0) return cfg.softening;
  return 2.0 * grid_scale(t, cfg) / cfg.grid_cells;
}

DecaySeries::DecaySeries(std::vector<double> t, std::vector<double> v) : times(std::move(t)), values(std::move(v)) {
  if (times.size() != values.size()) throw Error("decay series: times and values differ in length");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(values[i]) || !std::isfinite(times[i])) throw Error("decay series: non-finite entry");
    if (i > 0 && !(times[i] > times[i - 1])) throw Error("decay series: times must be strictly increasing");
  }
}

void DecaySeries::push_back(double t, double v) {
  if (!std::isfinite(t) || !std::isfinite(v)) throw NumericalError("decay series: non-finite entry at t=" + format_double(t));
  if (!times.empty() && !(t > times.back())) throw Error("decay series: times must be strictly increasing");
  times.push_back(t);
  values.push_back(v);
}

std::size_t GridSpec::nodes() const {
  std::size_t n = 1;
  for (int d = 0; d < dim; ++d) n *= static_cast<std::size_t>(cells);
  return n;
}

double GridSpec::cell_volume() const { return std::pow(cell_width(), dim); }

std::array<int, kMaxDim> GridSpec::unravel(std::size_t idx) const {
  std::array<int, kMaxDim> ijk{};
  for (int d = dim - 1; d >= 0; --d) {
    ijk[d] = static_cast<int>(idx % cells);
    idx /= cells;
  }
  return ijk;
}

std::size_t GridSpec::ravel(const std::array<int, kMaxDim>& ijk) const {
  std::size_t idx = 0;
  for (int d = 0; d < dim; ++d) idx = idx * cells + static_cast<std::size_t>(ijk[d]);
  return idx;
}

Vec GridSpec::position(std::size_t idx) const {
  const auto ijk = unravel(idx);
  Vec x{};
  for (int d = 0; d < dim; ++d) x[d] = coord(ijk[d]);
  return x;
}

bool GridSpec::interior(std::size_t idx, int band) const {
  const auto ijk = unravel(idx);
  for (int d = 0; d < dim; ++d)
    if (ijk[d] < band || ijk[d] >= cells - band) return false;
  return true;
}

GridSpec grid_at(double t, const SimConfig& cfg) { return GridSpec{cfg.dim, cfg.grid_cells, grid_scale(t, cfg)}; }

GridField GridField::scalar(const GridSpec& spec, double time) {
  GridField g;
  g.spec = spec;
  g.components = 1;
  g.time = time;
  g.data.assign(spec.nodes(), 0.0);
  return g;
}

GridField GridField::vector(const GridSpec& spec, double time) {
  GridField g;
  g.spec = spec;
  g.components = spec.dim;
  g.time = time;
  g.data.assign(spec.nodes() * spec.dim, 0.0);
  return g;
}

double GridField::magnitude(std::size_t node) const {
  double s = 0.0;
  for (int c = 0; c < components; ++c) s += at(node, c) * at(node, c);
  return std::sqrt(s);
}

double GridField::sup_magnitude() const {
  double m = 0.0;
  const std::size_t n = spec.nodes();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, magnitude(i));
  return m;
}

double GridField::integral() const {
  double s = 0.0;
  for (std::size_t i = 0; i < spec.nodes(); ++i) s += at(i);
  return s * spec.cell_volume();
}

}  // namespace vptrap
