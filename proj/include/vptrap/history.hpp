#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vptrap/dynamics.hpp"

namespace vptrap {

/// Time-stamped force grids (and, optionally, potential grids) recorded by a
/// simulation. Each snapshot carries its own grid scale s(t_k).
struct FieldHistory {
  int dim = 2;
  int cells = 64;
  std::vector<GridField> forces;
  std::vector<GridField> potentials;  // empty unless recorded

  std::size_t size() const { return forces.size(); }
  double time(std::size_t k) const { return forces[k].time; }
  double t_begin() const { return forces.front().time; }
  double t_end() const { return forces.back().time; }
  bool has_potentials() const { return !potentials.empty() && potentials.size() == forces.size(); }
  /// Throws unless snapshot times strictly increase and grids are congruent.
  void validate() const;
  /// Index k with t_k <= t < t_{k+1} (the last index when t == t_end).
  std::size_t bracket(double t) const;
};

/// Snapshot file "VPTRAP01": u32 dim, u32 cells, u64 count, then per
/// snapshot f64 time, f64 scale, f64 force grid (node-major, axis-minor).
/// Little-endian throughout.
void write_history(std::ostream& os, const FieldHistory& h);
void write_history_file(const std::string& path, const FieldHistory& h);
FieldHistory read_history(std::istream& is);
FieldHistory read_history_file(const std::string& path);

/// Space-time interpolation of a FieldHistory: multilinear in the rescaled
/// coordinate of each snapshot, linear in t between snapshots, the stored
/// grid itself at a snapshot time, and zero outside the spatial box or the
/// recorded time range.
class HistoryForce final : public ForceSampler {
 public:
  explicit HistoryForce(const FieldHistory& h);
  int dim() const override { return h_.dim; }
  Vec force(double t, const Vec& x) const override;
  double length_scale(double t) const override;
  /// Grid half-width at t, interpolated like the field; infinite outside
  /// the recorded time range, where the field is zero everywhere.
  double support_radius(double t) const override;

 private:
  const FieldHistory& h_;
};

}  // namespace vptrap
