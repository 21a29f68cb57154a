#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "vptrap/kinetic.hpp"

namespace vptrap {

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
  bool gating = true;  // informational lines never fail a suite
};

struct SuiteResult {
  std::string name;
  std::vector<CheckLine> checks;
  double seconds = 0.0;

  bool pass() const;
};

/// Reference configurations the suites run on. The 2D run is recorded once
/// (with potentials) and shared by the nonlinear, integrator, trapped and
/// modified-coefficients suites.
struct AcceptanceSetup {
  SimConfig ref2d;
  SimConfig ref3d;

  AcceptanceSetup();
  /// 2D reference taken from a config; the 3D run keeps its defaults.
  explicit AcceptanceSetup(const SimConfig& reference2d);
  const SimulationResult& reference_run() const;

 private:
  mutable std::shared_ptr<SimulationResult> run2d_;
};

/// Suite names in execution order.
const std::vector<std::string>& suite_names();

SuiteResult run_suite(const std::string& name, const AcceptanceSetup& setup);

/// One "[PASS]"/"[FAIL]"/"[INFO]" line per check plus a summary line.
void print_suite(std::ostream& os, const SuiteResult& r);

}  // namespace vptrap
