#include "vptrap/history.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace vptrap {

static_assert(std::endian::native == std::endian::little, "history I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'V', 'P', 'T', 'R', 'A', 'P', '0', '1'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("history file truncated");
  return v;
}

}  // namespace

void FieldHistory::validate() const {
  check_dim(dim);
  if (forces.empty()) throw Error("field history is empty");
  for (std::size_t k = 0; k < forces.size(); ++k) {
    const GridField& g = forces[k];
    if (g.spec.dim != dim || g.spec.cells != cells || g.components != dim)
      throw Error("field history: snapshot grids are not congruent");
    if (k > 0 && !(g.time > forces[k - 1].time)) throw Error("field history: times must strictly increase");
    for (double v : g.data)
      if (!std::isfinite(v)) throw NumericalError("field history: non-finite force value");
  }
  if (!potentials.empty() && potentials.size() != forces.size())
    throw Error("field history: potential and force snapshot counts differ");
}

std::size_t FieldHistory::bracket(double t) const {
  auto it = std::upper_bound(forces.begin(), forces.end(), t,
                             [](double v, const GridField& g) { return v < g.time; });
  if (it == forces.begin()) return 0;
  return static_cast<std::size_t>(it - forces.begin()) - 1;
}

void write_history(std::ostream& os, const FieldHistory& h) {
  h.validate();
  os.write(kMagic, 8);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(h.dim));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(h.cells));
  put<std::uint64_t>(os, h.size());
  for (const GridField& g : h.forces) {
    put<double>(os, g.time);
    put<double>(os, g.spec.scale);
    os.write(reinterpret_cast<const char*>(g.data.data()), static_cast<std::streamsize>(g.data.size() * sizeof(double)));
  }
  if (!os) throw Error("history write failed");
}

void write_history_file(const std::string& path, const FieldHistory& h) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open history file for writing: " + path);
  write_history(os, h);
}

FieldHistory read_history(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw Error("not a VPTRAP01 history file");
  FieldHistory h;
  h.dim = static_cast<int>(get<std::uint32_t>(is));
  h.cells = static_cast<int>(get<std::uint32_t>(is));
  check_dim(h.dim);
  if (h.cells < 2 || h.cells > 4096) throw Error("history file: implausible grid size");
  const std::uint64_t count = get<std::uint64_t>(is);
  for (std::uint64_t k = 0; k < count; ++k) {
    const double t = get<double>(is);
    const double scale = get<double>(is);
    GridField g = GridField::vector(GridSpec{h.dim, h.cells, scale}, t);
    is.read(reinterpret_cast<char*>(g.data.data()), static_cast<std::streamsize>(g.data.size() * sizeof(double)));
    if (!is) throw Error("history file truncated");
    h.forces.push_back(std::move(g));
  }
  h.validate();
  return h;
}

FieldHistory read_history_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open history file: " + path);
  return read_history(is);
}

HistoryForce::HistoryForce(const FieldHistory& h) : h_(h) { h_.validate(); }

Vec HistoryForce::force(double t, const Vec& x) const {
  if (t < h_.t_begin() || t > h_.t_end()) return {};
  const std::size_t k = h_.bracket(t);
  const GridField& a = h_.forces[k];
  if (t == a.time || k + 1 == h_.size()) return interpolate_vector(a, x);
  const GridField& b = h_.forces[k + 1];
  const double w = (t - a.time) / (b.time - a.time);
  const Vec fa = interpolate_vector(a, x), fb = interpolate_vector(b, x);
  Vec out{};
  for (int d = 0; d < h_.dim; ++d) out[d] = (1.0 - w) * fa[d] + w * fb[d];
  return out;
}

double HistoryForce::length_scale(double t) const {
  const std::size_t k = h_.bracket(std::clamp(t, h_.t_begin(), h_.t_end()));
  return h_.forces[k].spec.scale;
}

double HistoryForce::support_radius(double t) const {
  if (t < h_.t_begin() || t > h_.t_end()) return std::numeric_limits<double>::infinity();
  const std::size_t k = h_.bracket(t);
  if (k + 1 == h_.size()) return h_.forces[k].spec.scale;
  // the blended field vanishes only where both snapshots do
  return std::max(h_.forces[k].spec.scale, h_.forces[k + 1].spec.scale);
}

}  // namespace vptrap
