#pragma once

namespace aashgp {

// Selects between the OpenMP kernel and its serial reference. Both paths
// must produce identical results; the serial path exists for testing and
// benchmarking.
enum class Exec { Serial, Parallel };

int max_threads();

}  // namespace aashgp
