#pragma once

#include <Eigen/Dense>

namespace vptrap {

// Phase-space linear algebra in R^{2n}, n <= 3. Fixed maximum size keeps
// everything on the stack.
using PhaseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;
using PhaseVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 6, 1>;

}  // namespace vptrap
