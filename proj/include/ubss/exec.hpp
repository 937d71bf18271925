#pragma once

namespace ubss {

/// Execution policy for the block-parallel kernels. `serial` is the
/// reference path; `parallel` distributes independent blocks over OpenMP
/// threads and must produce bit-identical results.
enum class Exec { serial, parallel };

}  // namespace ubss
