#pragma once

namespace actsc {

/// Selects between the OpenMP kernel and its serial reference. Both produce
/// bit-identical results; the serial path exists for testing and benchmarks.
enum class Exec { serial, parallel };

} // namespace actsc
