#pragma once

namespace vptrap {

/// Selects between the serial reference path of a kernel and its OpenMP
/// path. Both paths must agree to round-off; the serial path is what the
/// tests treat as ground truth.
enum class Exec { Serial, Parallel };

/// Bounds the number of OpenMP workers used by Exec::Parallel kernels.
void set_workers(int k);
int workers();

}  // namespace vptrap
